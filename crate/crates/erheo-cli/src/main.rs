//! Batch front end: `erheo <command> --config <path> [--out <dir>]`.
//!
//! Configs are flat JSON objects of scalars/strings with strict key checking.
//! Every run writes its CSV artifacts plus a `manifest.json` recording the
//! config hash, seed, grid and the content hash of each produced file.
//! Exit codes: 0 success, 2 validation error, 3 numerical failure.

use clap::Parser;
use erheo_core::{
    constitutive::StressCoefficients,
    efield::MaterialFunction,
    error::Error,
    exponent::{log_hoelder_modulus, oscillation_cover},
    grid::{fmt17, Grid, Rect},
    io as csvio,
    pipeline,
    solver,
    truncation,
};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "erheo",
    about = "Batch simulator and diagnostics for steady micropolar electrorheological flow"
)]
struct Cli {
    /// efield | exponent-diag | audit | truncate | bogovskii | solve | verify
    command: String,
    /// Path to a flat JSON config file
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV artifacts and the manifest
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Strict reader over a flat JSON object: typed getters with defaults, and a
/// final check that every present key was recognized.
struct Config {
    map: serde_json::Map<String, serde_json::Value>,
    seen: BTreeSet<String>,
    raw: Vec<u8>,
}

impl Config {
    fn load(path: &Path) -> Result<Config, String> {
        let raw = std::fs::read(path).map_err(|e| format!("cannot read config: {e}"))?;
        let value: serde_json::Value =
            serde_json::from_slice(&raw).map_err(|e| format!("config is not valid JSON: {e}"))?;
        let map = match value {
            serde_json::Value::Object(m) => m,
            _ => return Err("config must be a JSON object".into()),
        };
        for (k, v) in &map {
            if v.is_array() || v.is_object() {
                return Err(format!("config must be flat; key '{k}' holds a nested value"));
            }
        }
        Ok(Config {
            map,
            seen: BTreeSet::new(),
            raw,
        })
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64, String> {
        self.seen.insert(key.to_string());
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| format!("key '{key}' must be a number")),
        }
    }

    fn u64(&mut self, key: &str, default: u64) -> Result<u64, String> {
        self.seen.insert(key.to_string());
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .ok_or_else(|| format!("key '{key}' must be a nonnegative integer")),
        }
    }

    fn bool(&mut self, key: &str, default: bool) -> Result<bool, String> {
        self.seen.insert(key.to_string());
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_bool()
                .ok_or_else(|| format!("key '{key}' must be a boolean")),
        }
    }

    fn string(&mut self, key: &str, default: &str) -> Result<String, String> {
        self.seen.insert(key.to_string());
        match self.map.get(key) {
            None => Ok(default.to_string()),
            Some(v) => v
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| format!("key '{key}' must be a string")),
        }
    }

    fn finish(&self) -> Result<(), String> {
        for k in self.map.keys() {
            if !self.seen.contains(k) {
                return Err(format!("unknown config key '{k}'"));
            }
        }
        Ok(())
    }
}

struct Manifest {
    command: String,
    config_sha256: String,
    seed: u64,
    grid: Option<Grid>,
    files: Vec<(String, String)>,
    out: PathBuf,
}

impl Manifest {
    fn new(command: &str, cfg: &Config, out: &Path) -> Manifest {
        Manifest {
            command: command.to_string(),
            config_sha256: hex(&Sha256::digest(&cfg.raw)),
            seed: 0,
            grid: None,
            files: Vec::new(),
            out: out.to_path_buf(),
        }
    }

    fn write_file(&mut self, name: &str, bytes: &[u8]) -> Result<(), Error> {
        let path = self.out.join(name);
        std::fs::write(&path, bytes)?;
        self.files.push((name.to_string(), hex(&Sha256::digest(bytes))));
        Ok(())
    }

    fn finalize(&self) -> Result<(), Error> {
        let mut root = serde_json::Map::new();
        root.insert("command".into(), self.command.clone().into());
        root.insert("config_sha256".into(), self.config_sha256.clone().into());
        root.insert("seed".into(), self.seed.into());
        if let Some(g) = &self.grid {
            let mut gm = serde_json::Map::new();
            gm.insert("nx".into(), (g.nx() as u64).into());
            gm.insert("ny".into(), (g.ny() as u64).into());
            gm.insert("x_min".into(), g.x_range().0.into());
            gm.insert("x_max".into(), g.x_range().1.into());
            gm.insert("y_min".into(), g.y_range().0.into());
            gm.insert("y_max".into(), g.y_range().1.into());
            gm.insert("h".into(), g.h().into());
            root.insert("grid".into(), gm.into());
        }
        let files: Vec<serde_json::Value> = self
            .files
            .iter()
            .map(|(n, h)| {
                let mut fm = serde_json::Map::new();
                fm.insert("name".into(), n.clone().into());
                fm.insert("sha256".into(), h.clone().into());
                fm.into()
            })
            .collect();
        root.insert("files".into(), files.into());
        let text = serde_json::to_string_pretty(&serde_json::Value::Object(root))
            .expect("manifest serialization");
        std::fs::write(self.out.join("manifest.json"), text)?;
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn material_from(cfg: &mut Config) -> Result<MaterialFunction, String> {
    let kind = cfg.string("material", "shifted")?;
    let p_base = cfg.f64("p_base", 1.8)?;
    let a = cfg.f64("a", 0.4)?;
    match kind.as_str() {
        "remark34" => Ok(MaterialFunction::remark34()),
        "shifted" => MaterialFunction::shifted(p_base, a)
            .map_err(|e| format!("{e} (the shifted material requires p_base > 1)")),
        other => Err(format!(
            "material must be 'remark34' or 'shifted', got '{other}'"
        )),
    }
}

fn coeffs_from(cfg: &mut Config) -> Result<StressCoefficients, String> {
    StressCoefficients::new(
        cfg.f64("alpha31", 1.0)?,
        cfg.f64("alpha33", 1.0)?,
        cfg.f64("alpha51", 0.0)?,
        cfg.f64("alpha71", 1.0)?,
        cfg.f64("alpha91", 0.0)?,
        cfg.f64("beta31", 0.0)?,
        cfg.f64("beta33", 1.0)?,
        cfg.f64("beta51", 0.0)?,
    )
    .map_err(|e| e.to_string())
}

enum Failure {
    Validation(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        match e {
            Error::IterationLimit { .. }
            | Error::Stagnation { .. }
            | Error::AuditFailure(_)
            | Error::IncompatibleFlux { .. }
            | Error::DegenerateWeight { .. }
            | Error::CoverFailure { .. }
            | Error::Io(_) => Failure::Numerical(e.to_string()),
            other => Failure::Validation(other.to_string()),
        }
    }
}

impl From<String> for Failure {
    fn from(s: String) -> Failure {
        Failure::Validation(s)
    }
}

fn to_bytes<F: FnOnce(&mut Vec<u8>) -> erheo_core::Result<()>>(
    f: F,
) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(Failure::from)?;
    Ok(buf)
}

fn cmd_efield(cfg: &mut Config, m: &mut Manifest) -> Result<(), Failure> {
    let nx = cfg.u64("nx", 64)? as usize;
    let material = material_from(cfg)?;
    let kmax = cfg.u64("blowup_kmax", 8)? as usize;
    m.seed = cfg.u64("seed", 0)?;
    cfg.finish()?;

    let run = pipeline::run_remark34(nx, &material, kmax).map_err(Failure::from)?;
    m.grid = Some(run.grid);
    m.write_file(
        "efield.csv",
        &to_bytes(|w| csvio::write_efield_csv(&run.field, w))?,
    )
    .map_err(Failure::from)?;
    m.write_file(
        "exponent.csv",
        &to_bytes(|w| csvio::write_exponent_csv(&run.p, w))?,
    )
    .map_err(Failure::from)?;
    m.write_file(
        "blowup.csv",
        &to_bytes(|w| csvio::write_blowup_csv(&run.blowup, w))?,
    )
    .map_err(Failure::from)?;
    println!(
        "efield: nx = {nx}, harmonicity l1 = {:.6e}, blowup max = {:.6}",
        run.harmonicity.composed_l1,
        run.blowup.last().map(|b| b.d).unwrap_or(0.0)
    );
    Ok(())
}

fn cmd_exponent_diag(cfg: &mut Config, m: &mut Manifest) -> Result<(), Failure> {
    let nx = cfg.u64("nx", 32)? as usize;
    let levels = cfg.u64("levels", 2)? as usize;
    let material = material_from(cfg)?;
    let d = cfg.u64("dimension", 2)? as u32;
    let inner = Rect::new(
        cfg.f64("inner_x_min", -1.8)?,
        cfg.f64("inner_x_max", -0.2)?,
        cfg.f64("inner_y_min", -0.8)?,
        cfg.f64("inner_y_max", 0.8)?,
    );
    m.seed = cfg.u64("seed", 0)?;
    cfg.finish()?;

    let mut lh = String::from("level,n,modulus\n");
    let mut cover_bytes = None;
    let mut base_run = None;
    for level in 0..levels.max(1) {
        let n = nx << level;
        let run = pipeline::run_remark34(n, &material, 1).map_err(Failure::from)?;
        let modulus = log_hoelder_modulus(&run.p);
        lh.push_str(&format!("{},{},{}\n", level, n, fmt17(modulus)));
        if level == 0 {
            let report = oscillation_cover(&run.p, inner, d).map_err(Failure::from)?;
            cover_bytes = Some(to_bytes(|w| csvio::write_cover_csv(&report, w))?);
            m.grid = Some(run.grid);
            base_run = Some(run);
        }
    }
    m.write_file("loghoelder.csv", lh.as_bytes())
        .map_err(Failure::from)?;
    m.write_file("cover.csv", &cover_bytes.expect("cover bytes"))
        .map_err(Failure::from)?;
    if let Some(run) = base_run {
        m.write_file(
            "exponent.csv",
            &to_bytes(|w| csvio::write_exponent_csv(&run.p, w))?,
        )
        .map_err(Failure::from)?;
    }
    Ok(())
}

fn cmd_audit(cfg: &mut Config, m: &mut Manifest) -> Result<(), Failure> {
    let trials = cfg.u64("trials", 10_000)? as usize;
    let seed = cfg.u64("seed", 42)?;
    let coeffs = coeffs_from(cfg)?;
    let material = material_from(cfg)?;
    m.seed = seed;
    cfg.finish()?;

    let audit =
        erheo_core::assumption_audit(&coeffs, &material, trials, seed).map_err(Failure::from)?;
    m.write_file(
        "audit.csv",
        &to_bytes(|w| csvio::write_audit_csv(&audit, w))?,
    )
    .map_err(Failure::from)?;
    print!("{}", audit.summary());
    audit.ensure_pass().map_err(Failure::from)?;
    Ok(())
}

fn cmd_truncate(cfg: &mut Config, m: &mut Manifest) -> Result<(), Failure> {
    let nx = cfg.u64("nx", 32)? as usize;
    let field_name = cfg.string("field", "spike-1")?;
    let lambda = cfg.f64("lambda", 5.0)?;
    let c_lip = cfg.f64("c_lip", truncation::C_LIP_DEFAULT)?;
    let j_max = cfg.u64("j_max", 3)? as u32;
    m.seed = cfg.u64("seed", 0)?;
    cfg.finish()?;

    let grid = Grid::unit(nx);
    let corpus = pipeline::truncation_corpus(grid);
    let (_, u) = corpus
        .iter()
        .find(|(n, _)| *n == field_name)
        .ok_or_else(|| {
            format!(
                "unknown corpus field '{field_name}'; available: {}",
                corpus
                    .iter()
                    .map(|(n, _)| n.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            )
        })?;
    m.grid = Some(grid);
    let result = truncation::lipschitz_truncate(u, lambda, c_lip).map_err(Failure::from)?;
    result.validate(u).map_err(Failure::from)?;
    m.write_file(
        "truncation.csv",
        &to_bytes(|w| result.write_csv(u, w))?,
    )
    .map_err(Failure::from)?;

    let p = erheo_core::VariableExponent::constant(grid, erheo_core::Centering::Node, 2.0)
        .map_err(Failure::from)?;
    let mut levels = String::from("j,lambda,quality\n");
    for j in 1..=j_max {
        let (lam, q) = truncation::select_levels(u, j, &p).map_err(Failure::from)?;
        levels.push_str(&format!("{},{},{}\n", j, fmt17(lam), fmt17(q)));
    }
    m.write_file("levels.csv", levels.as_bytes())
        .map_err(Failure::from)?;
    println!(
        "truncate: field {field_name}, lambda {lambda}, effective c {:.3}",
        result.effective_c
    );
    Ok(())
}

fn cmd_bogovskii(cfg: &mut Config, m: &mut Manifest) -> Result<(), Failure> {
    let nx = cfg.u64("nx", 32)? as usize;
    let rhs_kind = cfg.string("rhs", "sin")?;
    m.seed = cfg.u64("seed", 0)?;
    cfg.finish()?;

    let f = match rhs_kind.as_str() {
        "sin" => pipeline::bogovskii_rhs(nx),
        other => return Err(format!("unknown rhs kind '{other}' (use 'sin')").into()),
    };
    m.grid = Some(*f.grid());
    let result = truncation::bogovskii(&f).map_err(Failure::from)?;
    m.write_file(
        "bogovskii.csv",
        &to_bytes(|w| result.w.write_csv(w))?,
    )
    .map_err(Failure::from)?;
    let report = format!(
        "div_residual,outer_iterations\n{},{}\n",
        fmt17(result.div_residual),
        result.outer_iterations
    );
    m.write_file("bogovskii_report.csv", report.as_bytes())
        .map_err(Failure::from)?;
    println!(
        "bogovskii: nx = {nx}, div residual {:.3e} in {} outer iterations",
        result.div_residual, result.outer_iterations
    );
    Ok(())
}

fn cmd_solve(cfg: &mut Config, m: &mut Manifest) -> Result<(), Failure> {
    let nx = cfg.u64("nx", 32)? as usize;
    let n_reg = cfg.u64("n_reg", 1)? as u32;
    let f_amp = cfg.f64("f_amp", 0.1)?;
    let tol = cfg.f64("tol", 1e-8)?;
    let max_iter = cfg.u64("max_iter", 200)? as usize;
    let div_penalty = cfg.f64("div_penalty", 1e4)?;
    let convection = cfg.bool("convection", true)?;
    let r_exp = cfg.f64("r_exp", 0.0)?;
    let coeffs = coeffs_from(cfg)?;
    let material = material_from(cfg)?;
    m.seed = cfg.u64("seed", 0)?;
    cfg.finish()?;

    let mut setup = pipeline::default_nonlinear_setup(nx, n_reg).map_err(Failure::from)?;
    setup.coeffs = coeffs;
    setup.material = material;
    setup.p = erheo_core::shear_exponent(&setup.e, &material)
        .map_err(Failure::from)?
        .p;
    let (f, ell) = pipeline::default_forcing(setup.grid, f_amp);
    setup.f = f;
    setup.ell = ell;
    setup.div_penalty = div_penalty;
    setup.convection = convection;
    if r_exp > 0.0 {
        setup.r_exp = r_exp;
    } else {
        setup.r_exp = solver::default_r_exp(setup.p.p_minus());
    }
    setup.validate().map_err(Failure::from)?;
    m.grid = Some(setup.grid);

    let state = solver::solve(&setup, tol, max_iter).map_err(Failure::from)?;
    m.write_file("solution_v.csv", &to_bytes(|w| state.v.write_csv(w))?)
        .map_err(Failure::from)?;
    m.write_file(
        "solution_omega.csv",
        &to_bytes(|w| state.omega.write_csv(w))?,
    )
    .map_err(Failure::from)?;
    m.write_file(
        "residuals.csv",
        &to_bytes(|w| csvio::write_residuals_csv(&state, w))?,
    )
    .map_err(Failure::from)?;
    if let Some(e) = &state.energy {
        m.write_file("energy.csv", &to_bytes(|w| csvio::write_energy_csv(e, w))?)
            .map_err(Failure::from)?;
    }
    let norms = solver::stress_norm_report(&state, &setup).map_err(Failure::from)?;
    m.write_file(
        "stress_norms.csv",
        &to_bytes(|w| csvio::write_stress_norms_csv(norms, w))?,
    )
    .map_err(Failure::from)?;

    let last = state.residual_history.last().copied().unwrap_or(0.0);
    println!(
        "solve: nx = {nx}, n_reg = {n_reg}, {} steps, residual {last:.3e}, converged = {}",
        state.iteration, state.converged
    );
    if !state.converged {
        return Err(Failure::Numerical(format!(
            "solver did not converge: residual {last:.3e} after {} steps",
            state.iteration
        )));
    }
    Ok(())
}

fn cmd_verify(cfg: &mut Config, m: &mut Manifest) -> Result<(), Failure> {
    m.seed = cfg.u64("seed", 0)?;
    cfg.finish()?;
    let results = erheo_core::verify::run_all().map_err(Failure::from)?;
    let mut csv = String::from("name,pass,detail\n");
    let mut all = true;
    for r in &results {
        println!("[{}] {}  {}", if r.pass { "pass" } else { "FAIL" }, r.name, r.detail);
        csv.push_str(&format!(
            "{},{},{}\n",
            r.name.replace(',', ";"),
            r.pass as u8,
            r.detail.replace(',', ";")
        ));
        all &= r.pass;
    }
    m.write_file("verify.csv", csv.as_bytes())
        .map_err(Failure::from)?;
    if !all {
        return Err(Failure::Numerical("invariant suite failed".into()));
    }
    Ok(())
}

fn run() -> Result<(), (u8, String)> {
    let cli = Cli::parse();

    if let Ok(threads) = std::env::var("ERHEO_THREADS") {
        let n: usize = threads
            .parse()
            .map_err(|_| (2u8, "ERHEO_THREADS must be an integer".to_string()))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .ok();
        }
    }

    std::fs::create_dir_all(&cli.out)
        .map_err(|e| (3u8, format!("cannot create output directory: {e}")))?;
    let mut cfg =
        Config::load(&cli.config).map_err(|e| (2u8, e))?;
    let mut manifest = Manifest::new(&cli.command, &cfg, &cli.out);

    let result = match cli.command.as_str() {
        "efield" => cmd_efield(&mut cfg, &mut manifest),
        "exponent-diag" => cmd_exponent_diag(&mut cfg, &mut manifest),
        "audit" => cmd_audit(&mut cfg, &mut manifest),
        "truncate" => cmd_truncate(&mut cfg, &mut manifest),
        "bogovskii" => cmd_bogovskii(&mut cfg, &mut manifest),
        "solve" => cmd_solve(&mut cfg, &mut manifest),
        "verify" => cmd_verify(&mut cfg, &mut manifest),
        other => {
            return Err((2, format!("unknown command '{other}'")));
        }
    };

    match result {
        Ok(()) => {
            manifest
                .finalize()
                .map_err(|e| (3u8, format!("cannot write manifest: {e}")))?;
            Ok(())
        }
        Err(Failure::Validation(msg)) => Err((2, msg)),
        Err(Failure::Numerical(msg)) => {
            // still record whatever was produced
            manifest.finalize().ok();
            Err((3, msg))
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
