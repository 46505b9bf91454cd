//! Cross-module invariant battery behind the `verify` command: a quick
//! structural health check, distinct from the full acceptance suite.

use crate::constitutive::{assumption_audit, micro_rotation_tensor, StressCoefficients};
use crate::efield::MaterialFunction;
use crate::error::Result;
use crate::exponent::{conjugate, luxembourg_norm, modular, pairing, VariableExponent, Weight};
use crate::grid::{discrete_divergence, discrete_gradient, sym_skew_split, Centering, Field, Grid, Rank};
use crate::pipeline::truncation_corpus;
use crate::tensor::{Mat2, J};
use crate::truncation::{bogovskii, lipschitz_truncate, select_levels, weak_type_quotient, C_LIP_DEFAULT};
use crate::util::{pairwise_sum, stream_rng};
use rand::Rng;

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        pass,
        detail,
    }
}

fn random_field(g: Grid, seed: u64, amp: f64) -> Field {
    let mut rng = stream_rng(seed, 0);
    Field::from_fn(g, Rank::Scalar, Centering::Node, |_, _, _| {
        amp * (rng.random::<f64>() - 0.5)
    })
}

fn random_exponent(g: Grid, seed: u64) -> VariableExponent {
    let mut rng = stream_rng(seed, 1);
    VariableExponent::new(Field::scalar_from_fn(g, Centering::Node, |_, _| {
        1.2 + 2.8 * rng.random::<f64>()
    }))
    .unwrap()
}

fn random_weight(g: Grid, seed: u64, floor: f64) -> Weight {
    let mut rng = stream_rng(seed, 2);
    Weight::new(Field::scalar_from_fn(g, Centering::Node, |_, _| {
        floor + 10.0 * rng.random::<f64>()
    }))
    .unwrap()
}

fn check_grid_ops() -> CheckResult {
    let g = Grid::unit(16);
    let u = Field::scalar_from_fn(g, Centering::Node, |x, y| 3.0 * x - 2.0 * y);
    let du = discrete_gradient(&u).unwrap();
    let mut worst = 0.0f64;
    for s in 0..du.site_count() {
        worst = worst.max((du.get(s, 0) - 3.0).abs().max((du.get(s, 1) + 2.0).abs()));
    }
    let v = Field::from_fn(
        g,
        Rank::Vector2,
        Centering::Node,
        |x, y, c| if c == 0 { x } else { -y },
    );
    let dv = discrete_divergence(&v).unwrap().max_abs();
    let pass = worst < 1e-12 && dv < 1e-12;
    check(
        "grid: affine exactness",
        pass,
        format!("gradient err {worst:.2e}, div err {dv:.2e}"),
    )
}

fn check_norm_machinery() -> Vec<CheckResult> {
    let g = Grid::unit(16);
    let mut ball_ok = true;
    let mut pair_ok = true;
    let mut scale_ok = true;
    let mut detail = String::new();
    for seed in 0..60u64 {
        let u = random_field(g, seed, 2.0 + (seed % 5) as f64);
        let p = random_exponent(g, seed);
        let w = random_weight(g, seed, 0.0);
        let norm = luxembourg_norm(&u, &p, &w).unwrap();
        let rho = modular(&u, &p, &w).unwrap();
        let slack = 1e-9;
        if (norm <= 1.0 - slack && rho > 1.0 + slack)
            || (rho <= 1.0 - slack && norm > 1.0 + slack)
            || (norm <= 1.0 && rho > norm + slack)
            || (norm >= 1.0 && norm > rho + slack)
        {
            ball_ok = false;
            detail = format!("unit-ball violation at seed {seed}");
        }
        let t = 0.3 + (seed % 7) as f64;
        let n_scaled = luxembourg_norm(&u.scaled(t), &p, &w).unwrap();
        if (n_scaled - t * norm).abs() > 1e-9 * (1.0 + norm) {
            scale_ok = false;
        }
        if seed < 30 {
            let v = random_field(g, seed + 500, 1.5);
            let wp = random_weight(g, seed, 0.05);
            let (pd, wd) = conjugate(&p, &wp).unwrap();
            let lhs = pairing(&u, &v).unwrap().abs();
            let rhs = 2.0
                * luxembourg_norm(&u, &p, &wp).unwrap()
                * luxembourg_norm(&v, &pd, &wd).unwrap();
            if lhs > rhs * (1.0 + 1e-9) {
                pair_ok = false;
            }
        }
    }
    vec![
        check("norm: unit-ball property", ball_ok, detail),
        check("norm: scaling homogeneity", scale_ok, String::new()),
        check("norm: weighted pairing bound", pair_ok, String::new()),
    ]
}

fn check_identity_4_23() -> CheckResult {
    let g = Grid::unit(12);
    let mut worst = 0.0f64;
    for seed in 0..40u64 {
        let mut rng = stream_rng(seed, 7);
        let a = Field::from_fn(g, Rank::Tensor2x2, Centering::Node, |_, _, _| {
            rng.random::<f64>() - 0.5
        });
        let u = crate::truncation::random_smooth(g, Rank::Vector2, seed, 1, false);
        let w = crate::truncation::random_smooth(g, Rank::Scalar, seed, 2, false);
        let grad = discrete_gradient(&u).unwrap();
        let (du, _) = sym_skew_split(&grad).unwrap();
        let r = micro_rotation_tensor(&grad, &w).unwrap();
        let ac = a.to_cells();
        let gc = grad.to_cells();
        let dc = du.to_cells();
        let rc = r.to_cells();
        let wc = w.to_cells();
        let h2 = g.h() * g.h();
        let mut lhs = Vec::new();
        let mut rhs = Vec::new();
        for s in 0..ac.site_count() {
            let am = Mat2([ac.get(s, 0), ac.get(s, 1), ac.get(s, 2), ac.get(s, 3)]);
            let dm = Mat2([dc.get(s, 0), dc.get(s, 1), dc.get(s, 2), dc.get(s, 3)]);
            let rm = Mat2([rc.get(s, 0), rc.get(s, 1), rc.get(s, 2), rc.get(s, 3)]);
            let gm = Mat2([gc.get(s, 0), gc.get(s, 1), gc.get(s, 2), gc.get(s, 3)]);
            lhs.push(am.ddot(dm.add(rm)) * h2);
            rhs.push((am.ddot(gm) + am.skew().ddot(J.scale(wc.get(s, 0)))) * h2);
        }
        let l = pairwise_sum(&lhs);
        let r2 = pairwise_sum(&rhs);
        worst = worst.max((l - r2).abs() / l.abs().max(r2.abs()).max(1e-9));
    }
    check(
        "constitutive: sign identity",
        worst <= 1e-12,
        format!("worst relative defect {worst:.2e}"),
    )
}

fn check_audits() -> CheckResult {
    let c = StressCoefficients::default_unit();
    let m = MaterialFunction::shifted(1.8, 0.4).unwrap();
    let audit = assumption_audit(&c, &m, 2000, 42).unwrap();
    check(
        "constitutive: assumption audits",
        audit.all_pass(),
        audit
            .entries
            .iter()
            .map(|e| format!("{}:{}", e.name, if e.pass { "ok" } else { "FAIL" }))
            .collect::<Vec<_>>()
            .join(" "),
    )
}

fn check_truncation_corpus() -> Vec<CheckResult> {
    let g = Grid::unit(24);
    let corpus = truncation_corpus(g);
    let mut invariants_ok = true;
    let mut quality_ok = true;
    let mut weak_ok = true;
    let mut detail = String::new();
    let p = VariableExponent::constant(g, Centering::Node, 2.0).unwrap();
    let mut weak_max = 0.0f64;
    for (name, u) in &corpus {
        for lambda in [2.0, 8.0, 32.0] {
            let res = lipschitz_truncate(u, lambda, C_LIP_DEFAULT).unwrap();
            if res.validate(u).is_err() {
                invariants_ok = false;
                detail = format!("invariants failed on {name} at lambda {lambda}");
            }
            let q = weak_type_quotient(u, lambda, 2.0).unwrap();
            weak_max = weak_max.max(q);
        }
        let mut prev = f64::INFINITY;
        for j in [1u32, 2, 3] {
            let (_, q) = select_levels(u, j, &p).unwrap();
            if q > prev + 1e-12 {
                quality_ok = false;
                detail = format!("quality grew on {name} at block {j}");
            }
            prev = q;
        }
    }
    if !(weak_max.is_finite() && weak_max < 1e4) {
        weak_ok = false;
    }
    vec![
        check("truncation: corpus invariants", invariants_ok, detail.clone()),
        check("truncation: level quality nonincreasing", quality_ok, detail),
        check(
            "truncation: weak-type quotient bounded",
            weak_ok,
            format!("max quotient {weak_max:.3}"),
        ),
    ]
}

fn check_bogovskii() -> CheckResult {
    let f = crate::pipeline::bogovskii_rhs(24);
    match bogovskii(&f) {
        Ok(res) => check(
            "bogovskii: divergence residual",
            res.div_residual <= 1e-9,
            format!("residual {:.2e}", res.div_residual),
        ),
        Err(e) => check("bogovskii: divergence residual", false, e.to_string()),
    }
}

fn check_solver() -> CheckResult {
    match crate::pipeline::default_nonlinear_setup(12, 1) {
        Ok(setup) => match crate::solver::solve(&setup, 1e-8, 120) {
            Ok(state) => {
                let monotone = state
                    .residual_history
                    .windows(2)
                    .all(|w| w[1] <= w[0] * (1.0 + 1e-12));
                let boundary =
                    state.v.boundary_max_abs() == 0.0 && state.omega.boundary_max_abs() == 0.0;
                let energy_ok = state.energy.as_ref().map(|e| e.satisfies_bound()) == Some(true);
                check(
                    "solver: converged, monotone, bounded",
                    state.converged && monotone && boundary && energy_ok,
                    format!(
                        "steps {}, final residual {:.2e}",
                        state.iteration,
                        state.residual_history.last().copied().unwrap_or(0.0)
                    ),
                )
            }
            Err(e) => check("solver: converged, monotone, bounded", false, e.to_string()),
        },
        Err(e) => check("solver: converged, monotone, bounded", false, e.to_string()),
    }
}

/// Run the whole battery; each entry prints one pass/fail line.
pub fn run_all() -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    out.push(check_grid_ops());
    out.extend(check_norm_machinery());
    out.push(check_identity_4_23());
    out.push(check_audits());
    out.extend(check_truncation_corpus());
    out.push(check_bogovskii());
    out.push(check_solver());
    Ok(out)
}
