//! Time integrators.
//!
//! [`dop853_on_grid`] is an adaptive explicit Runge-Kutta method of order 8
//! with embedded 5th and 3rd order error estimates (Dormand-Prince / Hairer
//! coefficients). Steps are shortened so that every output grid point is hit
//! exactly, which avoids dense-output interpolation error in the stored
//! samples. [`Rk4`] is the classical fixed-step 4-stage method.

// Coefficient tables are quoted at their published precision.
#![allow(clippy::excessive_precision)]

use crate::error::{Result, S2kError};

/// Tolerances and limits for [`dop853_on_grid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dop853Options {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Dop853Options {
    fn default() -> Self {
        Dop853Options {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 50_000_000,
        }
    }
}

const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;

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

const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.333;
const FAC_MAX: f64 = 6.0;
const EXPO: f64 = 1.0 / 8.0;

/// `out = y + h Σ cᵢ kᵢ`.
fn combine(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &[f64])]) {
    out.copy_from_slice(y);
    for &(c, k) in terms {
        let hc = h * c;
        for (o, ki) in out.iter_mut().zip(k) {
            *o += hc * ki;
        }
    }
}

struct Stages {
    k: [Vec<f64>; 12],
    y_stage: Vec<f64>,
    y_new: Vec<f64>,
}

impl Stages {
    fn new(n: usize) -> Self {
        Stages {
            k: std::array::from_fn(|_| vec![0.0; n]),
            y_stage: vec![0.0; n],
            y_new: vec![0.0; n],
        }
    }
}

/// One trial step from `(t, y)` with `k[0] = f(t, y)` already set.
/// Leaves the 8th order solution in `y_new` and returns the scaled error norm.
fn trial_step<F>(f: &mut F, t: f64, y: &[f64], h: f64, s: &mut Stages, opts: &Dop853Options) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    macro_rules! stage {
        ($idx:expr, $c:expr, [$(($a:expr, $j:expr)),*]) => {{
            {
                let (done, rest) = s.k.split_at_mut($idx);
                let terms = [$(($a, done[$j].as_slice())),*];
                combine(&mut s.y_stage, y, h, &terms);
                f(t + $c * h, &s.y_stage, &mut rest[0]);
            }
        }};
    }
    stage!(1, C2, [(A21, 0)]);
    stage!(2, C3, [(A31, 0), (A32, 1)]);
    stage!(3, C4, [(A41, 0), (A43, 2)]);
    stage!(4, C5, [(A51, 0), (A53, 2), (A54, 3)]);
    stage!(5, C6, [(A61, 0), (A64, 3), (A65, 4)]);
    stage!(6, C7, [(A71, 0), (A74, 3), (A75, 4), (A76, 5)]);
    stage!(7, C8, [(A81, 0), (A84, 3), (A85, 4), (A86, 5), (A87, 6)]);
    stage!(8, C9, [(A91, 0), (A94, 3), (A95, 4), (A96, 5), (A97, 6), (A98, 7)]);
    stage!(9, C10, [(A101, 0), (A104, 3), (A105, 4), (A106, 5), (A107, 6), (A108, 7), (A109, 8)]);
    stage!(
        10,
        C11,
        [(A111, 0), (A114, 3), (A115, 4), (A116, 5), (A117, 6), (A118, 7), (A119, 8), (A1110, 9)]
    );
    stage!(
        11,
        1.0,
        [(A121, 0), (A124, 3), (A125, 4), (A126, 5), (A127, 6), (A128, 7), (A129, 8), (A1210, 9), (A1211, 10)]
    );
    let k = &s.k;
    let n = y.len();
    let (mut err5, mut err3) = (0.0, 0.0);
    for i in 0..n {
        let incr = B1 * k[0][i]
            + B6 * k[5][i]
            + B7 * k[6][i]
            + B8 * k[7][i]
            + B9 * k[8][i]
            + B10 * k[9][i]
            + B11 * k[10][i]
            + B12 * k[11][i];
        let yn = y[i] + h * incr;
        s.y_new[i] = yn;
        let sk = opts.atol + opts.rtol * y[i].abs().max(yn.abs());
        let e3 = incr - BHH1 * k[0][i] - BHH2 * k[8][i] - BHH3 * k[11][i];
        err3 += (e3 / sk).powi(2);
        let e5 = ER1 * k[0][i]
            + ER6 * k[5][i]
            + ER7 * k[6][i]
            + ER8 * k[7][i]
            + ER9 * k[8][i]
            + ER10 * k[9][i]
            + ER11 * k[10][i]
            + ER12 * k[11][i];
        err5 += (e5 / sk).powi(2);
    }
    let mut deno = err5 + 0.01 * err3;
    if deno <= 0.0 {
        deno = 1.0;
    }
    let err = h.abs() * err5 * (1.0 / (deno * n as f64)).sqrt();
    if err.is_finite() && s.y_new.iter().all(|v| v.is_finite()) {
        err
    } else {
        f64::INFINITY
    }
}

fn initial_step<F>(f: &mut F, t: f64, y: &[f64], f0: &[f64], h_max: f64, opts: &Dop853Options) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len() as f64;
    let sk: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let dnf: f64 = f0.iter().zip(&sk).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n;
    let dny: f64 = y.iter().zip(&sk).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n;
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        0.01 * (dny / dnf).sqrt()
    };
    h = h.min(h_max);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h * b).collect();
    let mut f1 = vec![0.0; y.len()];
    f(t + h, &y1, &mut f1);
    let der2 = (f1
        .iter()
        .zip(f0)
        .zip(&sk)
        .map(|((a, b), s)| ((a - b) / s).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
        / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if !(der12 > 1e-15) {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(EXPO)
    };
    let h = (100.0 * h).min(h1).min(h_max);
    if h.is_finite() && h > 0.0 {
        h
    } else {
        h_max.min(1e-6)
    }
}

/// Integrates `ẏ = f(t, y)` from `times[0]` and returns the state at every
/// entry of the strictly increasing grid `times`.
pub fn dop853_on_grid<F>(mut f: F, y0: &[f64], times: &[f64], opts: &Dop853Options) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if times.is_empty() {
        return Ok(Vec::new());
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || !times.iter().all(|t| t.is_finite()) {
        return Err(S2kError::invalid("time grid must be finite and strictly increasing"));
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(S2kError::invalid("tolerances must be positive"));
    }
    if !y0.iter().all(|v| v.is_finite()) {
        return Err(S2kError::invalid("initial state must be finite"));
    }
    let n = y0.len();
    let mut out = Vec::with_capacity(times.len());
    out.push(y0.to_vec());
    if times.len() == 1 {
        return Ok(out);
    }
    let span = times[times.len() - 1] - times[0];
    let mut s = Stages::new(n);
    let mut y = y0.to_vec();
    let mut t = times[0];
    f(t, &y, &mut s.k[0]);
    let mut h = initial_step(&mut f, t, &y, &s.k[0].clone(), span, opts);
    let mut last_rejected = false;
    let mut steps = 0usize;
    for &target in &times[1..] {
        while t < target {
            steps += 1;
            if steps > opts.max_steps {
                return Err(S2kError::Stiffness { t });
            }
            if 0.1 * h.abs() <= t.abs().max(1.0) * f64::EPSILON {
                return Err(S2kError::Stiffness { t });
            }
            let remaining = target - t;
            let truncated = h >= remaining * (1.0 - 1e-12);
            let h_try = if truncated { remaining } else { h };
            let err = trial_step(&mut f, t, &y, h_try, &mut s, opts);
            let fac11 = err.powf(EXPO);
            let fac = (1.0 / FAC_MAX).max((1.0 / FAC_MIN).min(fac11 / SAFE));
            if err <= 1.0 {
                let mut h_new = h_try / fac;
                if last_rejected {
                    h_new = h_new.min(h_try);
                }
                last_rejected = false;
                t = if truncated { target } else { t + h_try };
                std::mem::swap(&mut y, &mut s.y_new);
                f(t, &y, &mut s.k[0]);
                // a grid-truncated step must not throttle the controller
                h = if truncated { h_new.max(h) } else { h_new };
                h = h.min(span);
            } else {
                h = h_try / (1.0 / FAC_MIN).min(fac11 / SAFE);
                last_rejected = true;
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Scratch space for classical fixed-step RK4.
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        Rk4 {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    /// Slope at the start of the last step.
    pub fn first_slope(&self) -> &[f64] {
        &self.k1
    }

    /// Advances `y` in place by one step of size `h`. If `k1` is `Some`, it
    /// is used as the slope at `(t, y)` instead of evaluating `f`.
    pub fn step<F>(&mut self, f: &mut F, t: f64, y: &mut [f64], h: f64, k1: Option<&[f64]>) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        match k1 {
            Some(k) => self.k1.copy_from_slice(k),
            None => f(t, y, &mut self.k1)?,
        }
        combine(&mut self.tmp, y, 0.5 * h, &[(1.0, &self.k1)]);
        f(t + 0.5 * h, &self.tmp, &mut self.k2)?;
        combine(&mut self.tmp, y, 0.5 * h, &[(1.0, &self.k2)]);
        f(t + 0.5 * h, &self.tmp, &mut self.k3)?;
        combine(&mut self.tmp, y, h, &[(1.0, &self.k3)]);
        f(t + h, &self.tmp, &mut self.k4)?;
        let h6 = h / 6.0;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += h6 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..=n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn exponential_decay_to_tolerance() {
        let times = grid(100, 0.05);
        let ys = dop853_on_grid(|_, y, d| d[0] = -2.0 * y[0], &[1.0], &times, &Dop853Options::default()).unwrap();
        for (t, y) in times.iter().zip(&ys) {
            assert!((y[0] - (-2.0 * t).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn harmonic_oscillator_conserves_phase() {
        let times = grid(2000, 0.01);
        let ys = dop853_on_grid(
            |_, y, d| {
                d[0] = y[1];
                d[1] = -y[0];
            },
            &[1.0, 0.0],
            &times,
            &Dop853Options::default(),
        )
        .unwrap();
        let last = ys.last().unwrap();
        assert!((last[0] - 20f64.cos()).abs() < 1e-8);
        assert!((last[1] + 20f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn forced_linear_system_matches_closed_form() {
        // ẏ = -y + sin(5t), y(0)=0
        let times = grid(500, 0.002);
        let ys = dop853_on_grid(|t, y, d| d[0] = -y[0] + (5.0 * t).sin(), &[0.0], &times, &Dop853Options::default()).unwrap();
        for (t, y) in times.iter().zip(&ys) {
            let exact = ((5.0 * t).sin() - 5.0 * (5.0 * t).cos() + 5.0 * (-t).exp()) / 26.0;
            assert!((y[0] - exact).abs() < 1e-11, "t={t}");
        }
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let times = grid(5, 4.0);
        let f = |_: f64, y: &[f64], d: &mut [f64]| {
            d[0] = y[1];
            d[1] = -y[0] - 0.1 * y[0].powi(3);
        };
        let run = |rtol: f64| {
            dop853_on_grid(
                f,
                &[1.0, 0.0],
                &times,
                &Dop853Options {
                    rtol,
                    atol: rtol * 1e-2,
                    ..Default::default()
                },
            )
            .unwrap()
        };
        let fine = run(1e-13);
        let e = |r: &Vec<Vec<f64>>| (r.last().unwrap()[0] - fine.last().unwrap()[0]).abs();
        let (coarse, tight) = (e(&run(1e-5)), e(&run(1e-10)));
        assert!(coarse > tight, "{coarse} {tight}");
        assert!(tight < 1e-8);
    }

    #[test]
    fn blow_up_is_reported_as_stiffness() {
        let times = grid(10, 0.2);
        let r = dop853_on_grid(|_, y, d| d[0] = y[0] * y[0], &[1.0], &times, &Dop853Options::default());
        assert!(matches!(r, Err(S2kError::Stiffness { t }) if t > 0.9 && t < 1.0 + 1e-6), "{r:?}");
    }

    #[test]
    fn rejects_bad_grid() {
        let r = dop853_on_grid(|_, _, d| d[0] = 0.0, &[0.0], &[0.0, 0.0], &Dop853Options::default());
        assert!(r.is_err());
    }

    #[test]
    fn rk4_global_order_four() {
        let run = |h: f64| {
            let mut rk = Rk4::new(1);
            let mut y = [1.0];
            let n = (1.0 / h).round() as usize;
            let mut f = |t: f64, y: &[f64], d: &mut [f64]| -> Result<()> {
                d[0] = -y[0] + t;
                Ok(())
            };
            for i in 0..n {
                rk.step(&mut f, i as f64 * h, &mut y, h, None).unwrap();
            }
            // y = t - 1 + 2e^{-t}
            (y[0] - 2.0 * (-1f64).exp()).abs()
        };
        let ratio = run(0.1) / run(0.05);
        assert!(ratio > 14.0 && ratio < 18.0, "{ratio}");
    }
}
