//! Extra stress S and couple stress N of the generalized-Newtonian family,
//! the 2-D micro-rotation coupling, and Monte Carlo audits of the growth,
//! coercivity and strict-monotonicity assumptions the solver relies on.
//!
//! Dimension is fixed to d = 2 with a scalar micro-rotation: `eps : w = w J`
//! and `eps : S = S21 - S12`. The sign pair is pinned jointly by the algebraic
//! identity A : (Du + R(u, w)) = A : grad u + A^skew : (w J), which the tests
//! verify on random fields.

use crate::efield::MaterialFunction;
use crate::error::{Error, Result};
use crate::grid::{Field, Rank};
use crate::tensor::{Mat2, Vec2, J};
use crate::util::stream_rng;
use rand::Rng;
use rayon::prelude::*;

/// Material constants of the constitutive pair (S, N). The four constants
/// required positive are validated; the cross-coupling constants alpha51,
/// alpha91, beta51 are unconstrained and default to zero.
#[derive(Clone, Copy, Debug)]
pub struct StressCoefficients {
    pub alpha31: f64,
    pub alpha33: f64,
    pub alpha51: f64,
    pub alpha71: f64,
    pub alpha91: f64,
    pub beta31: f64,
    pub beta33: f64,
    pub beta51: f64,
}

impl StressCoefficients {
    pub fn new(
        alpha31: f64,
        alpha33: f64,
        alpha51: f64,
        alpha71: f64,
        alpha91: f64,
        beta31: f64,
        beta33: f64,
        beta51: f64,
    ) -> Result<StressCoefficients> {
        if !(alpha31 > 0.0 && alpha33 > 0.0 && alpha71 > 0.0 && beta33 > 0.0) {
            return Err(Error::Parameter(
                "alpha31, alpha33, alpha71, beta33 must be positive".into(),
            ));
        }
        if !(beta31 >= 0.0) {
            return Err(Error::Parameter("beta31 must be nonnegative".into()));
        }
        Ok(StressCoefficients {
            alpha31,
            alpha33,
            alpha51,
            alpha71,
            alpha91,
            beta31,
            beta33,
            beta51,
        })
    }

    /// The audit/solver default: the positivity-constrained constants set to
    /// one, beta31 and all cross couplings zero.
    pub fn default_unit() -> StressCoefficients {
        StressCoefficients::new(1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0).unwrap()
    }
}

/// Pointwise kinematic sample (D, R, L, E); D is symmetrized and R
/// skew-symmetrized at construction, rejecting corrections above 1e-12.
#[derive(Clone, Copy, Debug)]
pub struct KinematicState {
    pub d: Mat2,
    pub r: Mat2,
    pub l: Mat2,
    pub e: Vec2,
}

impl KinematicState {
    pub fn new(d: Mat2, r: Mat2, l: Mat2, e: Vec2) -> Result<KinematicState> {
        let ds = d.sym();
        let rk = r.skew();
        let scale = d.frob().max(r.frob()).max(1.0);
        if d.sub(ds).frob() > 1e-12 * scale || r.sub(rk).frob() > 1e-12 * scale {
            return Err(Error::InvalidInput(
                "D must be symmetric and R skew-symmetric (tolerance 1e-12)".into(),
            ));
        }
        Ok(KinematicState {
            d: ds,
            r: rk,
            l,
            e,
        })
    }
}

/// R(v, w) = (grad v)^skew + w J, pointwise over fields.
pub fn micro_rotation_tensor(grad_v: &Field, omega: &Field) -> Result<Field> {
    if grad_v.rank() != Rank::Tensor2x2 {
        return Err(Error::RankMismatch {
            expected: "tensor2x2",
            got: grad_v.rank().name(),
        });
    }
    if omega.rank() != Rank::Scalar || !grad_v.same_layout(omega) {
        return Err(Error::GridMismatch);
    }
    let mut out = Field::zeros(*grad_v.grid(), Rank::Tensor2x2, grad_v.centering());
    for s in 0..grad_v.site_count() {
        let g = Mat2([
            grad_v.get(s, 0),
            grad_v.get(s, 1),
            grad_v.get(s, 2),
            grad_v.get(s, 3),
        ]);
        let r = g.skew().add(J.scale(omega.get(s, 0)));
        for c in 0..4 {
            out.set(s, c, r.0[c]);
        }
    }
    Ok(out)
}

/// Extra stress of the canonical constitutive family, with p = p_hat(|E|^2).
pub fn stress_s(state: &KinematicState, c: &StressCoefficients, m: &MaterialFunction) -> Mat2 {
    let e2 = state.e.dot(state.e);
    let p = m.eval(e2);
    let gd = (1.0 + state.d.frob()).powf(p - 2.0);
    let gr = (1.0 + state.r.frob()).powf(p - 2.0);
    let de = state.d.matvec(state.e);
    let re = state.r.matvec(state.e);
    let mut s = state.d.scale((c.alpha31 + c.alpha33 * e2) * gd);
    if c.alpha51 != 0.0 {
        s = s.add(de.outer(state.e).add(state.e.outer(de)).scale(c.alpha51 * gd));
    }
    s = s.add(state.r.scale(c.alpha71 * e2 * gr));
    if c.alpha91 != 0.0 {
        s = s.add(re.outer(state.e).add(state.e.outer(re)).scale(c.alpha91 * gr));
    }
    s
}

/// Couple stress N(L, E), with p = p_hat(|E|^2).
pub fn couple_stress_n(l: Mat2, e: Vec2, c: &StressCoefficients, m: &MaterialFunction) -> Mat2 {
    let e2 = e.dot(e);
    let p = m.eval(e2);
    let gl = (1.0 + l.frob()).powf(p - 2.0);
    let mut n = l.scale((c.beta31 + c.beta33 * e2) * gl);
    if c.beta51 != 0.0 {
        let le = l.matvec(e);
        n = n.add(le.outer(e).add(e.outer(le)).scale(c.beta51 * gl));
    }
    n
}

/// 2-D reduction of eps : S, the scalar S21 - S12.
pub fn eps_contract_s(s: Mat2) -> f64 {
    s.0[2] - s.0[1]
}

#[derive(Clone, Debug)]
pub struct AuditEntry {
    pub name: &'static str,
    pub pass: bool,
    /// growth quotient (S.2/N.2) or fitted coercivity slope (S.3/N.3);
    /// unused (0) for the monotonicity entries
    pub constant_c: f64,
    /// fitted coercivity offset; unused (0) elsewhere
    pub constant_big_c: f64,
    /// minimum monotonicity product over the strict domain; unused (0) for
    /// growth/coercivity entries
    pub min_product: f64,
    /// flattened extremal sample
    pub witness: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct AssumptionAudit {
    pub entries: Vec<AuditEntry>,
    pub trials: usize,
    pub seed: u64,
}

impl AssumptionAudit {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn entry(&self, name: &str) -> &AuditEntry {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .expect("known audit name")
    }

    pub fn ensure_pass(&self) -> Result<()> {
        for e in &self.entries {
            if !e.pass {
                return Err(Error::AuditFailure(format!(
                    "{} violated; witness sample {:?}",
                    e.name, e.witness
                )));
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            s.push_str(&format!(
                "{}: {}  c = {:.6e}  C = {:.6e}  min_product = {:.6e}\n",
                e.name,
                if e.pass { "pass" } else { "FAIL" },
                e.constant_c,
                e.constant_big_c,
                e.min_product
            ));
        }
        s
    }
}

struct TrialSample {
    d1: Mat2,
    r1: Mat2,
    d2: Mat2,
    r2: Mat2,
    l1: Mat2,
    l2: Mat2,
    e: Vec2,
}

fn gauss(rng: &mut impl Rng) -> f64 {
    // Box-Muller from two uniforms
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    let t: f64 = rng.random();
    lo * (hi / lo).powf(t)
}

fn random_sym(rng: &mut impl Rng, mag: f64) -> Mat2 {
    let m = Mat2([gauss(rng), gauss(rng), 0.0, gauss(rng)]).sym();
    let f = m.frob();
    if f == 0.0 {
        Mat2([mag, 0.0, 0.0, 0.0])
    } else {
        m.scale(mag / f)
    }
}

fn random_skew(rng: &mut impl Rng, mag: f64) -> Mat2 {
    let sign = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
    J.scale(sign * mag / J.frob())
}

fn random_full(rng: &mut impl Rng, mag: f64) -> Mat2 {
    let m = Mat2([gauss(rng), gauss(rng), gauss(rng), gauss(rng)]);
    let f = m.frob();
    if f == 0.0 {
        Mat2([mag, 0.0, 0.0, 0.0])
    } else {
        m.scale(mag / f)
    }
}

fn sample_trial(seed: u64, trial: u64) -> TrialSample {
    let mut rng = stream_rng(seed, trial);
    // log-uniform magnitudes exercise both the degenerate-|E| and the
    // large-strain regimes
    let md1 = log_uniform(&mut rng, 1e-3, 1e3);
    let md2 = log_uniform(&mut rng, 1e-3, 1e3);
    let mr1 = log_uniform(&mut rng, 1e-3, 1e3);
    let mr2 = log_uniform(&mut rng, 1e-3, 1e3);
    let ml1 = log_uniform(&mut rng, 1e-3, 1e3);
    let ml2 = log_uniform(&mut rng, 1e-3, 1e3);
    let me = log_uniform(&mut rng, 1e-3, 10.0);
    let phi: f64 = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
    TrialSample {
        d1: random_sym(&mut rng, md1),
        r1: random_skew(&mut rng, mr1),
        d2: random_sym(&mut rng, md2),
        r2: random_skew(&mut rng, mr2),
        l1: random_full(&mut rng, ml1),
        l2: random_full(&mut rng, ml2),
        e: Vec2([me * phi.cos(), me * phi.sin()]),
    }
}

struct TrialStats {
    // growth quotients
    q_s2_sym: f64,
    q_s2_skew: f64,
    q_n2: f64,
    // coercivity points (x = |.|^p, y = normalized product)
    s3_d: (f64, f64),
    s3_r: (f64, f64),
    n3: (f64, f64),
    // monotonicity products (None if outside the strict domain)
    s4: Option<f64>,
    n4: Option<f64>,
    witness: Vec<f64>,
}

fn run_trial(c: &StressCoefficients, m: &MaterialFunction, seed: u64, trial: u64) -> TrialStats {
    let t = sample_trial(seed, trial);
    let e2 = t.e.dot(t.e);
    let p = m.eval(e2);

    let state1 = KinematicState {
        d: t.d1,
        r: t.r1,
        l: t.l1,
        e: t.e,
    };
    let state2 = KinematicState {
        d: t.d2,
        r: t.r2,
        l: t.l2,
        e: t.e,
    };
    let s1 = stress_s(&state1, c, m);
    let s2t = stress_s(&state2, c, m);
    let n1 = couple_stress_n(t.l1, t.e, c, m);
    let n2t = couple_stress_n(t.l2, t.e, c, m);

    let q_s2_sym = s1.sym().frob() / ((1.0 + e2) * (1.0 + t.d1.frob().powf(p - 1.0)));
    let q_s2_skew = s1.skew().frob() / (e2 * (1.0 + t.r1.frob().powf(p - 1.0)));
    let q_n2 = n1.frob() / (e2 * (1.0 + t.l1.frob().powf(p - 1.0)));

    let s3_d = (t.d1.frob().powf(p), s1.ddot(t.d1) / (1.0 + e2));
    let s3_r = (t.r1.frob().powf(p), s1.ddot(t.r1) / e2);
    let n3 = (t.l1.frob().powf(p), n1.ddot(t.l1) / e2);

    // strict monotonicity domains
    let em = e2.sqrt();
    let s4_excluded = t.d1.sub(t.d2).frob() == 0.0
        && t.r1.sub(t.r2).scale(em).frob() == 0.0;
    let s4 = if s4_excluded {
        None
    } else {
        let diff = t.d1.sub(t.d2).add(t.r1.sub(t.r2));
        Some(s1.sub(s2t).ddot(diff))
    };
    let n4 = if em > 0.0 && t.l1.sub(t.l2).frob() > 0.0 {
        Some(n1.sub(n2t).ddot(t.l1.sub(t.l2)))
    } else {
        None
    };

    let mut witness = Vec::with_capacity(22);
    witness.extend_from_slice(&t.d1.0);
    witness.extend_from_slice(&t.r1.0);
    witness.extend_from_slice(&t.d2.0);
    witness.extend_from_slice(&t.r2.0);
    witness.extend_from_slice(&t.l1.0);
    witness.extend_from_slice(&t.l2.0);
    witness.extend_from_slice(&t.e.0);

    TrialStats {
        q_s2_sym,
        q_s2_skew,
        q_n2,
        s3_d,
        s3_r,
        n3,
        s4,
        n4,
        witness,
    }
}

/// Fit first the slope from the large-x half of the cloud, then the smallest
/// offset making y >= c (x - C) hold on every sample.
fn fit_coercivity(points: &[(f64, f64)]) -> (f64, f64, usize) {
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let x_med = xs[xs.len() / 2];
    let mut c = f64::INFINITY;
    let mut c_idx = 0;
    for (i, &(x, y)) in points.iter().enumerate() {
        if x >= x_med && x > 0.0 {
            let slope = y / x;
            if slope < c {
                c = slope;
                c_idx = i;
            }
        }
    }
    if !c.is_finite() || c <= 0.0 {
        return (c.min(0.0), f64::INFINITY, c_idx);
    }
    let mut big_c = 0.0f64;
    for &(x, y) in points {
        big_c = big_c.max(x - y / c);
    }
    (c, big_c, c_idx)
}

/// Monte Carlo audit of the six structural assumptions on (S, N): growth,
/// coercivity with fitted constants, and strict monotonicity on the strict
/// domains. Trials draw log-uniform magnitudes with random orientations and
/// are reproducible for a given seed regardless of thread count.
pub fn assumption_audit(
    c: &StressCoefficients,
    m: &MaterialFunction,
    trials: usize,
    seed: u64,
) -> Result<AssumptionAudit> {
    if trials < 1 {
        return Err(Error::Parameter("audit needs trials >= 1".into()));
    }
    let stats: Vec<TrialStats> = (0..trials as u64)
        .into_par_iter()
        .map(|t| run_trial(c, m, seed, t))
        .collect();

    let argmax = |f: &dyn Fn(&TrialStats) -> f64| -> usize {
        let mut best = 0;
        for i in 1..stats.len() {
            if f(&stats[i]) > f(&stats[best]) {
                best = i;
            }
        }
        best
    };

    let mut entries = Vec::with_capacity(6);

    // S.2 growth: report the larger of the sym/skew quotients
    let i_sym = argmax(&|s: &TrialStats| s.q_s2_sym);
    let i_skew = argmax(&|s: &TrialStats| s.q_s2_skew);
    let q_sym = stats[i_sym].q_s2_sym;
    let q_skew = stats[i_skew].q_s2_skew;
    let (q_s2, i_s2) = if q_sym >= q_skew {
        (q_sym, i_sym)
    } else {
        (q_skew, i_skew)
    };
    entries.push(AuditEntry {
        name: "S.2",
        pass: q_s2.is_finite(),
        constant_c: q_s2,
        constant_big_c: 0.0,
        min_product: 0.0,
        witness: stats[i_s2].witness.clone(),
    });

    // S.3 coercivity: fit (c, C) for the D- and R-pairings, report the
    // weaker slope and the larger offset
    let pts_d: Vec<(f64, f64)> = stats.iter().map(|s| s.s3_d).collect();
    let pts_r: Vec<(f64, f64)> = stats.iter().map(|s| s.s3_r).collect();
    let (cd, cd_big, cd_idx) = fit_coercivity(&pts_d);
    let (cr, cr_big, cr_idx) = fit_coercivity(&pts_r);
    let s3_pass = cd > 0.0 && cr > 0.0 && cd_big.is_finite() && cr_big.is_finite();
    let s3_idx = if cd <= cr { cd_idx } else { cr_idx };
    entries.push(AuditEntry {
        name: "S.3",
        pass: s3_pass,
        constant_c: cd.min(cr),
        constant_big_c: cd_big.max(cr_big),
        min_product: 0.0,
        witness: stats[s3_idx].witness.clone(),
    });

    // S.4 strict monotonicity
    let mut s4_min = f64::INFINITY;
    let mut s4_idx = usize::MAX;
    for (i, s) in stats.iter().enumerate() {
        if let Some(v) = s.s4 {
            if v < s4_min {
                s4_min = v;
                s4_idx = i;
            }
        }
    }
    let s4_pass = s4_idx != usize::MAX && s4_min > 0.0;
    entries.push(AuditEntry {
        name: "S.4",
        pass: s4_pass,
        constant_c: 0.0,
        constant_big_c: 0.0,
        min_product: if s4_idx == usize::MAX { 0.0 } else { s4_min },
        witness: if s4_idx == usize::MAX {
            Vec::new()
        } else {
            stats[s4_idx].witness.clone()
        },
    });

    // N.2
    let i_n2 = argmax(&|s: &TrialStats| s.q_n2);
    entries.push(AuditEntry {
        name: "N.2",
        pass: stats[i_n2].q_n2.is_finite(),
        constant_c: stats[i_n2].q_n2,
        constant_big_c: 0.0,
        min_product: 0.0,
        witness: stats[i_n2].witness.clone(),
    });

    // N.3
    let pts_n: Vec<(f64, f64)> = stats.iter().map(|s| s.n3).collect();
    let (cn, cn_big, cn_idx) = fit_coercivity(&pts_n);
    entries.push(AuditEntry {
        name: "N.3",
        pass: cn > 0.0 && cn_big.is_finite(),
        constant_c: cn,
        constant_big_c: cn_big,
        min_product: 0.0,
        witness: stats[cn_idx].witness.clone(),
    });

    // N.4
    let mut n4_min = f64::INFINITY;
    let mut n4_idx = usize::MAX;
    for (i, s) in stats.iter().enumerate() {
        if let Some(v) = s.n4 {
            if v < n4_min {
                n4_min = v;
                n4_idx = i;
            }
        }
    }
    let n4_pass = n4_idx != usize::MAX && n4_min > 0.0;
    entries.push(AuditEntry {
        name: "N.4",
        pass: n4_pass,
        constant_c: 0.0,
        constant_big_c: 0.0,
        min_product: if n4_idx == usize::MAX { 0.0 } else { n4_min },
        witness: if n4_idx == usize::MAX {
            Vec::new()
        } else {
            stats[n4_idx].witness.clone()
        },
    });

    Ok(AssumptionAudit {
        entries,
        trials,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Centering, Grid};
    use crate::util::pairwise_sum;

    fn p2() -> MaterialFunction {
        MaterialFunction::constant(2.0).unwrap()
    }

    #[test]
    fn micro_rotation_hand_cases() {
        let g = Grid::unit(4);
        let zero_grad = Field::zeros(g, Rank::Tensor2x2, Centering::Node);
        let zero_omega = Field::zeros(g, Rank::Scalar, Centering::Node);
        let r = micro_rotation_tensor(&zero_grad, &zero_omega).unwrap();
        assert_eq!(r.max_abs(), 0.0);

        let one_omega = Field::scalar_from_fn(g, Centering::Node, |_, _| 1.0);
        let r = micro_rotation_tensor(&zero_grad, &one_omega).unwrap();
        assert_eq!(r.get(0, 1), 1.0);
        assert_eq!(r.get(0, 2), -1.0);

        // grad v = [[0,2],[0,0]], omega = -1: skew = [[0,1],[-1,0]], total 0
        let grad = Field::from_fn(
            g,
            Rank::Tensor2x2,
            Centering::Node,
            |_, _, c| if c == 1 { 2.0 } else { 0.0 },
        );
        let neg_omega = Field::scalar_from_fn(g, Centering::Node, |_, _| -1.0);
        let r = micro_rotation_tensor(&grad, &neg_omega).unwrap();
        assert_eq!(r.max_abs(), 0.0);
    }

    #[test]
    fn stress_vanishes_on_zero_state() {
        let c = StressCoefficients::default_unit();
        let st = KinematicState::new(Mat2::ZERO, Mat2::ZERO, Mat2::ZERO, Vec2([3.0, -1.0]))
            .unwrap();
        assert_eq!(stress_s(&st, &c, &p2()).frob(), 0.0);
    }

    #[test]
    fn stress_zero_field_drops_e_terms() {
        let c = StressCoefficients::new(2.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0.0).unwrap();
        let d = Mat2([0.5, 0.1, 0.1, -0.3]);
        let st = KinematicState::new(d, Mat2::ZERO, Mat2::ZERO, Vec2::ZERO).unwrap();
        let m = MaterialFunction::shifted(1.8, 0.4).unwrap();
        let s = stress_s(&st, &c, &m);
        // only alpha31 (1 + |D|)^(p(0)-2) D survives
        let expect = d.scale(2.0 * (1.0 + d.frob()).powf(1.8 - 2.0));
        assert!(s.sub(expect).frob() < 1e-15);
    }

    #[test]
    fn stress_hand_value() {
        // D = diag(1,-1), R = 0, E = (1,0), a31 = a33 = a51 = 1, rest 0,
        // p = 2: S = 2 D + [[2,0],[0,0]] = [[4,0],[0,-2]]
        let c = StressCoefficients::new(1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0).unwrap();
        let st = KinematicState::new(
            Mat2([1.0, 0.0, 0.0, -1.0]),
            Mat2::ZERO,
            Mat2::ZERO,
            Vec2([1.0, 0.0]),
        )
        .unwrap();
        let s = stress_s(&st, &c, &p2());
        assert!(s.sub(Mat2([4.0, 0.0, 0.0, -2.0])).frob() < 1e-14, "{s:?}");
    }

    #[test]
    fn couple_stress_hand_values() {
        let c = StressCoefficients::new(1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0).unwrap();
        let m = p2();
        assert_eq!(couple_stress_n(Mat2::ZERO, Vec2([2.0, 0.0]), &c, &m).frob(), 0.0);
        // E = 0, beta31 = 0: N = 0 regardless of L
        let n = couple_stress_n(Mat2([1.0, 2.0, 3.0, 4.0]), Vec2::ZERO, &c, &m);
        assert_eq!(n.frob(), 0.0);
        // L = I, E = (0,1), beta33 = 1: N = (1 + sqrt2)^0 I = I
        let n = couple_stress_n(Mat2::IDENTITY, Vec2([0.0, 1.0]), &c, &m);
        assert!(n.sub(Mat2::IDENTITY).frob() < 1e-15);
    }

    #[test]
    fn eps_contract_hand_values() {
        assert_eq!(eps_contract_s(Mat2([1.0, 2.0, 2.0, 5.0])), 0.0);
        assert_eq!(eps_contract_s(J), -2.0);
        let s = Mat2([0.3, -1.2, 0.7, 2.0]);
        assert_eq!(eps_contract_s(s), eps_contract_s(s.skew()));
    }

    #[test]
    fn kinematic_state_projects_and_rejects() {
        let slightly = Mat2([1.0, 0.5 + 1e-15, 0.5, 0.0]);
        assert!(KinematicState::new(slightly, Mat2::ZERO, Mat2::ZERO, Vec2::ZERO).is_ok());
        let bad = Mat2([1.0, 2.0, 0.0, 0.0]);
        assert!(KinematicState::new(bad, Mat2::ZERO, Mat2::ZERO, Vec2::ZERO).is_err());
    }

    // A : (Du + R(u, w)) = A : grad u + A^skew : (w J), summed over cells.
    // This is the identity that pins every 2-D sign convention.
    #[test]
    fn identity_4_23_on_random_fields() {
        use crate::grid::{discrete_gradient, sym_skew_split};
        use rand::Rng;
        let g = Grid::unit(12);
        for seed in 0..100u64 {
            let mut rng = stream_rng(seed, 7);
            let a = Field::from_fn(g, Rank::Tensor2x2, Centering::Node, |_, _, _| {
                rng.random::<f64>() - 0.5
            });
            let u = Field::from_fn(g, Rank::Vector2, Centering::Node, |x, y, c| {
                let s = (3.1 * x + 1.7 * y).sin();
                if c == 0 {
                    s
                } else {
                    (2.3 * x - 0.9 * y).cos()
                }
            });
            let w = Field::scalar_from_fn(g, Centering::Node, |x, y| (x * y).sin() + 0.3);

            let grad = discrete_gradient(&u).unwrap();
            let (du, _) = sym_skew_split(&grad).unwrap();
            let r = micro_rotation_tensor(&grad, &w).unwrap();

            let ac = a.to_cells();
            let gc = grad.to_cells();
            let dc = du.to_cells();
            let rc = r.to_cells();
            let wc = w.to_cells();
            let h2 = g.h() * g.h();
            let mut lhs_terms = Vec::new();
            let mut rhs_terms = Vec::new();
            for s in 0..ac.site_count() {
                let am = Mat2([ac.get(s, 0), ac.get(s, 1), ac.get(s, 2), ac.get(s, 3)]);
                let dm = Mat2([dc.get(s, 0), dc.get(s, 1), dc.get(s, 2), dc.get(s, 3)]);
                let rm = Mat2([rc.get(s, 0), rc.get(s, 1), rc.get(s, 2), rc.get(s, 3)]);
                let gm = Mat2([gc.get(s, 0), gc.get(s, 1), gc.get(s, 2), gc.get(s, 3)]);
                lhs_terms.push(am.ddot(dm.add(rm)) * h2);
                rhs_terms
                    .push((am.ddot(gm) + am.skew().ddot(J.scale(wc.get(s, 0)))) * h2);
            }
            let lhs = pairwise_sum(&lhs_terms);
            let rhs = pairwise_sum(&rhs_terms);
            assert!(
                (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1e-6),
                "seed {seed}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn stress_splits_by_argument_when_cross_terms_vanish() {
        let c = StressCoefficients::default_unit();
        let m = MaterialFunction::shifted(1.8, 0.4).unwrap();
        let d = Mat2([0.4, 0.1, 0.1, -0.2]);
        let e = Vec2([1.0, 2.0]);
        for r_mag in [0.0, 0.5, 2.0] {
            let r = J.scale(r_mag);
            let st = KinematicState::new(d, r, Mat2::ZERO, e).unwrap();
            let s = stress_s(&st, &c, &m);
            // sym part must not depend on R
            let st0 = KinematicState::new(d, Mat2::ZERO, Mat2::ZERO, e).unwrap();
            let s0 = stress_s(&st0, &c, &m);
            assert!(s.sym().sub(s0.sym()).frob() < 1e-14);
            // skew part must not depend on D
            let std = KinematicState::new(Mat2::ZERO, r, Mat2::ZERO, e).unwrap();
            let sd = stress_s(&std, &c, &m);
            assert!(s.skew().sub(sd.skew()).frob() < 1e-14);
        }
    }

    #[test]
    fn quadratic_monotonicity_closed_form() {
        // p = 2, cross terms zero: product = (a31 + a33 |E|^2)|D1 - D2|^2
        //                                   + a71 |E|^2 |R1 - R2|^2
        let c = StressCoefficients::default_unit();
        let m = p2();
        let d1 = Mat2([1.0, 0.2, 0.2, -0.4]);
        let d2 = Mat2([-0.3, 0.0, 0.0, 0.9]);
        let e = Vec2([0.7, -0.2]);
        let st1 = KinematicState::new(d1, Mat2::ZERO, Mat2::ZERO, e).unwrap();
        let st2 = KinematicState::new(d2, Mat2::ZERO, Mat2::ZERO, e).unwrap();
        let prod = stress_s(&st1, &c, &m)
            .sub(stress_s(&st2, &c, &m))
            .ddot(d1.sub(d2));
        let e2 = e.dot(e);
        let dd = d1.sub(d2).frob();
        // (1 + |D|)^0 = 1, so the product is exactly the quadratic form
        assert!((prod - (1.0 + e2) * dd * dd).abs() < 1e-12, "{prod}");
        assert!(prod > 0.0);
    }

    #[test]
    fn continuity_probe() {
        let c = StressCoefficients::default_unit();
        let m = MaterialFunction::shifted(1.8, 0.4).unwrap();
        let d = Mat2([0.5, -0.1, -0.1, 0.2]);
        let r = J.scale(0.4);
        let e = Vec2([1.2, 0.3]);
        let base = stress_s(&KinematicState::new(d, r, Mat2::ZERO, e).unwrap(), &c, &m);
        let mut prev = f64::INFINITY;
        for k in 1..=4 {
            let delta = 10f64.powi(-(k as i32));
            let dp = d.add(Mat2([delta, 0.0, 0.0, -delta]));
            let s =
                stress_s(&KinematicState::new(dp, r, Mat2::ZERO, e).unwrap(), &c, &m);
            let diff = s.sub(base).frob();
            assert!(diff < 20.0 * delta, "delta {delta}: {diff}");
            assert!(diff < prev);
            prev = diff;
        }
    }

    #[test]
    fn audit_passes_on_defaults() {
        let c = StressCoefficients::default_unit();
        let m = MaterialFunction::shifted(1.8, 0.4).unwrap();
        let audit = assumption_audit(&c, &m, 2000, 42).unwrap();
        assert!(audit.all_pass(), "{}", audit.summary());
        assert!(audit.entry("S.4").min_product > 0.0);
        assert!(audit.entry("N.4").min_product > 0.0);
        assert!(audit.entry("S.3").constant_c > 0.0);
    }

    #[test]
    fn audit_is_deterministic() {
        let c = StressCoefficients::default_unit();
        let m = MaterialFunction::shifted(1.8, 0.4).unwrap();
        let a1 = assumption_audit(&c, &m, 500, 7).unwrap();
        let a2 = assumption_audit(&c, &m, 500, 7).unwrap();
        for (e1, e2) in a1.entries.iter().zip(a2.entries.iter()) {
            assert_eq!(e1.constant_c, e2.constant_c);
            assert_eq!(e1.min_product, e2.min_product);
        }
    }

    #[test]
    fn audit_rejects_zero_trials() {
        let c = StressCoefficients::default_unit();
        let m = p2();
        assert!(assumption_audit(&c, &m, 0, 1).is_err());
    }
}
