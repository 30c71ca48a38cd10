//! Reference values for the ordered exponential.
//!
//! [`ordered_exp`] integrates `∂_λ U = H(λ) U` with the Dormand-Prince 8(5,3)
//! pair; [`taylor_terms`] expands `∂^p U` at the start point; and
//! [`piecewise_constant_exact`] handles generators that are constant on
//! segments.

// Tableau constants are kept exactly as published.
#![allow(clippy::excessive_precision)]

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{mat_exp, spectral_norm, ComplexMatrix};
use crate::operator::{uniform_grid, TermSet};

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub u: ComplexMatrix,
    /// Sum of the accepted local error estimates (Frobenius norm).
    pub est_error: f64,
    pub steps_taken: usize,
    pub rejected_steps: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct OracleOptions {
    pub tol: f64,
    pub max_steps: usize,
    /// Smallest step allowed, relative to `|dt|`.
    pub min_step_ratio: f64,
}

impl OracleOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { tol: 1e-13, max_steps: 2_000_000, min_step_ratio: 1e-12 }
    }
}

/// `U(μ + dt, μ)`; `dt` may be negative.
pub fn ordered_exp(ts: &TermSet, mu: f64, dt: f64, tol: f64) -> Result<OracleResult> {
    ordered_exp_with(ts, mu, dt, OracleOptions::with_tol(tol))
}

pub fn ordered_exp_with(ts: &TermSet, mu: f64, dt: f64, opts: OracleOptions) -> Result<OracleResult> {
    if !(opts.tol >= 100.0 * f64::EPSILON) {
        return Err(Error::InvalidArgument(format!("oracle tolerance {:e} is below 100 machine epsilons", opts.tol)));
    }
    if !dt.is_finite() || !mu.is_finite() {
        return Err(Error::NonFinite("oracle interval".into()));
    }
    let n = ts.dim();
    let mut y = DMatrix::<Complex64>::identity(n, n);
    let mut out = OracleResult { u: ComplexMatrix::identity(n), est_error: 0.0, steps_taken: 0, rejected_steps: 0 };
    if dt == 0.0 {
        return Ok(out);
    }
    let end = mu + dt;
    let (lo, hi) = if dt > 0.0 { (mu, end) } else { (end, mu) };
    let mut cuts: Vec<f64> = ts.singular_points().into_iter().filter(|&p| lo < p && p < hi).collect();
    if dt < 0.0 {
        cuts.reverse();
    }
    let mut nodes = vec![mu];
    nodes.extend(cuts);
    nodes.push(end);
    let mut stepper = Stepper { ts, opts, tol_rate: opts.tol / dt.abs(), min_step: opts.min_step_ratio * dt.abs() };
    for w in nodes.windows(2) {
        stepper.integrate_piece(&mut y, w[0], w[1], &mut out)?;
    }
    out.u = ComplexMatrix::from_nalgebra(y)?;
    Ok(out)
}

struct Stepper<'a> {
    ts: &'a TermSet,
    opts: OracleOptions,
    /// Allowed local error per unit of λ.
    tol_rate: f64,
    min_step: f64,
}

impl Stepper<'_> {
    fn integrate_piece(&mut self, y: &mut DMatrix<Complex64>, a: f64, b: f64, out: &mut OracleResult) -> Result<()> {
        let sign = (b - a).signum();
        // One-sided evaluation at the piece ends so a jump at a breakpoint is
        // seen from the correct side.
        let (inner_lo, inner_hi) = if a < b { (a.next_up(), b.next_down()) } else { (b.next_up(), a.next_down()) };
        let (inner_lo, inner_hi) = if inner_lo <= inner_hi { (inner_lo, inner_hi) } else { (a.min(b), a.max(b)) };
        let rhs = |t: f64, y: &DMatrix<Complex64>| -> Result<DMatrix<Complex64>> {
            Ok(self.ts.sum_at(t.clamp(inner_lo, inner_hi))?.into_nalgebra() * y)
        };

        let mut t = a;
        let mut k1 = rhs(t, y)?;
        let h_norm = spectral_norm(&self.ts.sum_at(t.clamp(inner_lo, inner_hi))?).max(1e-3);
        let mut h = sign * (b - a).abs().min(0.1 / h_norm);
        let mut facold = 1e-4f64;

        while (b - t) * sign > 0.0 {
            if out.steps_taken + out.rejected_steps >= self.opts.max_steps {
                return Err(Error::StepLimit(self.opts.max_steps));
            }
            let last = (t + h - b) * sign >= 0.0;
            if last {
                h = b - t;
            }
            let (y_new, k_end, err) = dop853_step(&rhs, t, y, &k1, h)?;
            let scale = self.tol_rate * h.abs() * y.iter().chain(y_new.iter()).map(|z| z.norm()).fold(1.0, f64::max);
            let ratio = err / scale;

            let fac11 = ratio.powf(EXPO1);
            let fac = (fac11 / facold.powf(BETA) / SAFETY).clamp(FAC_MIN_INV, FAC_MAX_INV);

            if ratio <= 1.0 {
                facold = ratio.max(1e-4);
                out.est_error += err;
                out.steps_taken += 1;
                t = if last { b } else { t + h };
                *y = y_new;
                k1 = k_end;
                h /= fac;
            } else {
                out.rejected_steps += 1;
                h /= (fac11 / SAFETY).min(FAC_MAX_INV);
                if h.abs() < self.min_step {
                    return Err(Error::StepUnderflow { lambda: t, step: h.abs() });
                }
            }
            if !h.is_finite() || h == 0.0 {
                return Err(Error::StepUnderflow { lambda: t, step: h.abs() });
            }
        }
        Ok(())
    }
}

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 1.0 / 8.0 - BETA * 0.2;
/// Growth per step at most 6, shrink at most 3.
const FAC_MIN_INV: f64 = 1.0 / 6.0;
const FAC_MAX_INV: f64 = 3.0;

type Rhs<'a> = dyn Fn(f64, &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> + 'a;

/// One Dormand-Prince 8(5,3) step. Returns the new state, the derivative
/// there (first stage of the next step) and the local error estimate.
fn dop853_step(
    f: &Rhs<'_>,
    t: f64,
    y: &DMatrix<Complex64>,
    k1: &DMatrix<Complex64>,
    h: f64,
) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>, f64)> {
    let comb = |terms: &[(f64, &DMatrix<Complex64>)]| -> DMatrix<Complex64> {
        let mut acc = y.clone();
        for (c, k) in terms {
            acc += *k * Complex64::new(c * h, 0.0);
        }
        acc
    };
    let k2 = f(t + C2 * h, &comb(&[(A21, k1)]))?;
    let k3 = f(t + C3 * h, &comb(&[(A31, k1), (A32, &k2)]))?;
    let k4 = f(t + C4 * h, &comb(&[(A41, k1), (A43, &k3)]))?;
    let k5 = f(t + C5 * h, &comb(&[(A51, k1), (A53, &k3), (A54, &k4)]))?;
    let k6 = f(t + C6 * h, &comb(&[(A61, k1), (A64, &k4), (A65, &k5)]))?;
    let k7 = f(t + C7 * h, &comb(&[(A71, k1), (A74, &k4), (A75, &k5), (A76, &k6)]))?;
    let k8 = f(t + C8 * h, &comb(&[(A81, k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)]))?;
    let k9 = f(t + C9 * h, &comb(&[(A91, k1), (A94, &k4), (A95, &k5), (A96, &k6), (A97, &k7), (A98, &k8)]))?;
    let k10 = f(
        t + C10 * h,
        &comb(&[(A101, k1), (A104, &k4), (A105, &k5), (A106, &k6), (A107, &k7), (A108, &k8), (A109, &k9)]),
    )?;
    let k11 = f(
        t + C11 * h,
        &comb(&[(A111, k1), (A114, &k4), (A115, &k5), (A116, &k6), (A117, &k7), (A118, &k8), (A119, &k9), (A1110, &k10)]),
    )?;
    let y12 = comb(&[
        (A121, k1),
        (A124, &k4),
        (A125, &k5),
        (A126, &k6),
        (A127, &k7),
        (A128, &k8),
        (A129, &k9),
        (A1210, &k10),
        (A1211, &k11),
    ]);
    let k12 = f(t + h, &y12)?;

    let lin = |terms: &[(f64, &DMatrix<Complex64>)]| -> DMatrix<Complex64> {
        let mut acc = DMatrix::<Complex64>::zeros(y.nrows(), y.ncols());
        for (c, k) in terms {
            acc += *k * Complex64::new(*c, 0.0);
        }
        acc
    };
    let slope = lin(&[(B1, k1), (B6, &k6), (B7, &k7), (B8, &k8), (B9, &k9), (B10, &k10), (B11, &k11), (B12, &k12)]);
    let y_new = y + &slope * Complex64::new(h, 0.0);

    let e3 = &slope - lin(&[(BHH1, k1), (BHH2, &k9), (BHH3, &k12)]);
    let e5 = lin(&[(ER1, k1), (ER6, &k6), (ER7, &k7), (ER8, &k8), (ER9, &k9), (ER10, &k10), (ER11, &k11), (ER12, &k12)]);
    let (n3, n5) = (e3.norm_squared(), e5.norm_squared());
    let deno = n5 + 0.01 * n3;
    let err = if deno > 0.0 { h.abs() * n5 / deno.sqrt() } else { 0.0 };
    if y_new.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite(format!("oracle state at lambda = {}", t + h)));
    }
    let k_end = f(t + h, &y_new)?;
    Ok((y_new, k_end, err))
}

/// A product of `H^{(i)}` factors, left to right, stored as derivative orders.
pub type Word = Vec<u8>;

/// Expansion of `T_p` as integer combinations of words.
pub fn taylor_words(p_max: usize) -> Vec<BTreeMap<Word, u64>> {
    let mut out = Vec::with_capacity(p_max + 1);
    let mut current: BTreeMap<Word, u64> = BTreeMap::new();
    current.insert(Vec::new(), 1);
    out.push(current.clone());
    for _ in 0..p_max {
        let mut next = BTreeMap::new();
        for (word, &c) in &current {
            // T_p · H
            let mut w = word.clone();
            w.push(0);
            *next.entry(w).or_insert(0) += c;
            // ∂T_p, by the product rule
            for i in 0..word.len() {
                let mut w = word.clone();
                w[i] += 1;
                *next.entry(w).or_insert(0) += c;
            }
        }
        out.push(next.clone());
        current = next;
    }
    out
}

/// `B_p`, the number of set partitions of `p` elements.
pub fn bell_number(p: usize) -> u64 {
    let mut row = vec![1u64];
    for _ in 0..p {
        let mut next = vec![*row.last().expect("nonempty")];
        for &x in &row {
            let v = *next.last().expect("nonempty") + x;
            next.push(v);
        }
        row = next;
    }
    row[0]
}

fn evaluate_words(words: &BTreeMap<Word, u64>, derivs: &[ComplexMatrix], dim: usize) -> ComplexMatrix {
    let mut acc = ComplexMatrix::zeros(dim);
    for (w, &c) in words {
        let prod = w.iter().fold(ComplexMatrix::identity(dim), |m, &i| &m * &derivs[i as usize]);
        acc.axpy(Complex64::new(c as f64, 0.0), &prod);
    }
    acc
}

fn derivatives_at(ts: &TermSet, u: f64, count: usize) -> Result<Vec<ComplexMatrix>> {
    (0..count).map(|i| ts.derivative_sum(u, i)).collect()
}

/// `[T_0, ..., T_P]` at `u = mu`, where `T_{p+1} = T_p H + ∂T_p`, `T_0 = I`
/// and `∂^p_λ U(λ, μ) = T_p(λ) U(λ, μ)`.
pub fn taylor_terms(ts: &TermSet, mu: f64, p_max: usize) -> Result<Vec<ComplexMatrix>> {
    let words = taylor_words(p_max);
    let derivs = derivatives_at(ts, mu, p_max)?;
    Ok(words.iter().map(|w| evaluate_words(w, &derivs, ts.dim())).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct TruncationCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub grid_points: usize,
    pub safety_factor: f64,
}

impl TruncationCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// Compares the order-`P` Taylor truncation error of `U(μ+dt, μ)` against
/// `1.1 · max_u |T_{P+1}(u) U(u, μ)| dt^{P+1} / (P+1)!` over 65 points.
pub fn truncation_bound_check(ts: &TermSet, mu: f64, dt: f64, p: usize, tol: f64) -> Result<TruncationCheck> {
    const GRID: usize = 65;
    const SAFETY: f64 = 1.1;
    let available = ts.max_derivative_on(mu, mu + dt);
    if !available.allows(p) {
        return Err(Error::SmoothnessExceeded { requested: p, available });
    }
    let words = taylor_words(p + 1);
    let at_mu = derivatives_at(ts, mu, p + 1)?;
    let mut approx = ComplexMatrix::zeros(ts.dim());
    let mut factorial = 1.0;
    for (i, w) in words.iter().take(p + 1).enumerate() {
        if i > 0 {
            factorial *= i as f64;
        }
        approx.axpy(Complex64::new(dt.powi(i as i32) / factorial, 0.0), &evaluate_words(w, &at_mu, ts.dim()));
    }
    let exact = ordered_exp(ts, mu, dt, tol)?.u;
    let lhs = spectral_norm(&(&exact - &approx));

    let grid = uniform_grid(mu, mu + dt, GRID);
    let mut propagator = ComplexMatrix::identity(ts.dim());
    let mut worst = 0.0f64;
    for (i, &u) in grid.iter().enumerate() {
        if i > 0 {
            propagator = &ordered_exp(ts, grid[i - 1], u - grid[i - 1], tol)?.u * &propagator;
        }
        let t_next = evaluate_words(&words[p + 1], &derivatives_at(ts, u, p + 1)?, ts.dim());
        worst = worst.max(spectral_norm(&(&t_next * &propagator)));
    }
    let rhs = SAFETY * worst * dt.abs().powi(p as i32 + 1) / (factorial * (p + 1) as f64);
    Ok(TruncationCheck { lhs, rhs, grid_points: GRID, safety_factor: SAFETY })
}

/// `Π_i exp(H_i w_i)`, later segments on the left.
pub fn piecewise_constant_exact(segments: &[(ComplexMatrix, f64)]) -> Result<ComplexMatrix> {
    let (first, _) = segments.first().ok_or_else(|| Error::InvalidArgument("no segments".into()))?;
    let mut u = ComplexMatrix::identity(first.dim());
    for (h, w) in segments {
        if !w.is_finite() {
            return Err(Error::NonFinite("segment width".into()));
        }
        u = mat_exp(&h.scale(*w))?.checked_mul(&u)?;
    }
    Ok(u)
}

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;

const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;

const BHH1: f64 = 0.244094488188976377952755905512;
const BHH2: f64 = 0.733846688281611857341361741547;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510;
const C5: f64 = 0.281649658092772603273242802490;
const C6: f64 = 0.333333333333333333333333333333;
const C7: f64 = 0.25;
const C8: f64 = 0.307692307692307692307692307692;
const C9: f64 = 0.651282051282051282051282051282;
const C10: f64 = 0.6;
const C11: f64 = 0.857142857142857142857142857142;

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290;
const ER10: f64 = 0.3341791187130174790297318841;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;
