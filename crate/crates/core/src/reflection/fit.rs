//! Nonlinear fits of normalized reflection traces.
//!
//! Internally every rate and frequency is expressed in units of 2π·1 MHz, with probe
//! frequencies measured from the center of the grid. The reflection ratio is invariant under
//! that rescaling and the fit parameters all end up of order one.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{Estimate, ReflectionFitParams, ReflectionTrace};
use crate::bias::Bias;
use crate::constants::angular;
use crate::error::{Error, Result};
use crate::lsq::{levenberg_marquardt, LeastSquaresProblem, LmOptions, LmReport};
use crate::tunneling::damping_rate_highbias;

const UNIT: f64 = 2.0 * std::f64::consts::PI * 1e6;

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub lm: LmOptions,
    /// Fit a single Fano factor for all biased traces instead of one per trace.
    pub share_fano: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            lm: LmOptions::default(),
            share_fano: false,
        }
    }
}

/// Whether `γ_tr`, `γ_x` and the reference resonance are fitted or held at their initial values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SharedMode {
    Free,
    Frozen,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFit {
    pub bias: Bias,
    pub params: ReflectionFitParams,
    /// Root-mean-square of `|model − data|` over the trace.
    pub rms_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointFit {
    pub traces: Vec<TraceFit>,
    pub gamma_tr: f64,
    pub gamma_x: f64,
    pub reference_resonance: f64,
    pub rms_residual: f64,
    pub iterations: usize,
    /// Singular values of the column-normalized Jacobian at the optimum, descending.
    pub jacobian_singular_values: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Scaling {
    center: f64,
}

impl Scaling {
    fn for_trace(trace: &ReflectionTrace) -> Self {
        let f = &trace.frequencies;
        Scaling {
            center: angular(0.5 * (f[0] + f[f.len() - 1])),
        }
    }
    fn omega_to_scaled(&self, omega: f64) -> f64 {
        (omega - self.center) / UNIT
    }
    fn omega_from_scaled(&self, w: f64) -> f64 {
        self.center + w * UNIT
    }
}

struct ScaledTrace {
    w: Vec<f64>,
    data: Vec<Complex64>,
}

impl ScaledTrace {
    fn new(trace: &ReflectionTrace, s: &Scaling) -> Self {
        ScaledTrace {
            w: trace
                .frequencies
                .iter()
                .map(|f| s.omega_to_scaled(angular(*f)))
                .collect(),
            data: trace.values.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    n_traces: usize,
    shared_free: bool,
    share_fano: bool,
}

#[derive(Debug, Clone, Copy, Default)]
struct Columns {
    gtr: Option<usize>,
    gx: Option<usize>,
    w0: Option<usize>,
    gt: Option<usize>,
    fano: Option<usize>,
    wv: Option<usize>,
}

impl Layout {
    fn n_shared(&self) -> usize {
        3 * self.shared_free as usize + 2 * self.share_fano as usize
    }
    fn per_trace(&self) -> usize {
        if self.share_fano {
            2
        } else {
            4
        }
    }
    fn len(&self) -> usize {
        self.n_shared() + self.n_traces * self.per_trace()
    }
    fn columns(&self, t: usize) -> Columns {
        let mut c = Columns::default();
        let mut next = 0;
        if self.shared_free {
            c.gtr = Some(0);
            c.gx = Some(1);
            c.w0 = Some(2);
            next = 3;
        }
        if self.share_fano {
            c.fano = Some(next);
            next += 2;
        }
        let base = next + t * self.per_trace();
        c.gt = Some(base);
        if self.share_fano {
            c.wv = Some(base + 1);
        } else {
            c.fano = Some(base + 1);
            c.wv = Some(base + 3);
        }
        c
    }
}

/// Scaled parameter values for one trace.
#[derive(Debug, Clone, Copy)]
struct Values {
    gtr: f64,
    gx: f64,
    w0: f64,
    gt: f64,
    fano: Complex64,
    wv: f64,
}

struct RatioProblem {
    traces: Vec<ScaledTrace>,
    layout: Layout,
    gt0: f64,
    /// `(γ_tr, γ_x, ω_0)` when shared parameters are frozen.
    frozen: [f64; 3],
}

impl RatioProblem {
    fn values(&self, p: &[f64], t: usize) -> Values {
        let c = self.layout.columns(t);
        let get = |col: Option<usize>, frozen: f64| col.map_or(frozen, |i| p[i]);
        let fano_col = c.fano.expect("fano column always present");
        Values {
            gtr: get(c.gtr, self.frozen[0]),
            gx: get(c.gx, self.frozen[1]),
            w0: get(c.w0, self.frozen[2]),
            gt: p[c.gt.unwrap()],
            fano: Complex64::new(p[fano_col], p[fano_col + 1]),
            wv: p[c.wv.unwrap()],
        }
    }

    fn n_residuals(&self) -> usize {
        2 * self.traces.iter().map(|t| t.w.len()).sum::<usize>()
    }
}

struct PointModel {
    ratio: Complex64,
    reference: Complex64,
    den_biased: Complex64,
    den_reference: Complex64,
}

fn point_model(w: f64, v: &Values, gt0: f64) -> PointModel {
    let den_biased = Complex64::new(v.gt + v.gtr + v.gx, -2.0 * (w - v.wv));
    let den_reference = Complex64::new(gt0 + v.gtr + v.gx, -2.0 * (w - v.w0));
    let biased = -v.fano + 2.0 * v.gtr / den_biased;
    let reference = -1.0 + 2.0 * v.gtr / den_reference;
    PointModel {
        ratio: biased / reference,
        reference,
        den_biased,
        den_reference,
    }
}

impl LeastSquaresProblem for RatioProblem {
    fn residuals(&self, p: &[f64]) -> DVector<f64> {
        let mut r = DVector::zeros(self.n_residuals());
        let mut row = 0;
        for (t, trace) in self.traces.iter().enumerate() {
            let v = self.values(p, t);
            for (w, d) in trace.w.iter().zip(&trace.data) {
                let diff = point_model(*w, &v, self.gt0).ratio - d;
                r[row] = diff.re;
                r[row + 1] = diff.im;
                row += 2;
            }
        }
        r
    }

    fn jacobian(&self, p: &[f64]) -> Option<DMatrix<f64>> {
        let mut jac = DMatrix::zeros(self.n_residuals(), self.layout.len());
        let mut row = 0;
        let i = Complex64::new(0.0, 1.0);
        for (t, trace) in self.traces.iter().enumerate() {
            let v = self.values(p, t);
            let c = self.layout.columns(t);
            for w in &trace.w {
                let m = point_model(*w, &v, self.gt0);
                let da_sq = m.den_biased * m.den_biased;
                let db_sq = m.den_reference * m.den_reference;
                // ∂R = (∂A − R·∂B) / B
                let d = |da: Complex64, db: Complex64| (da - m.ratio * db) / m.reference;
                let mut put = |col: Option<usize>, g: Complex64| {
                    if let Some(col) = col {
                        jac[(row, col)] += g.re;
                        jac[(row + 1, col)] += g.im;
                    }
                };
                put(
                    c.gtr,
                    d(
                        2.0 / m.den_biased - 2.0 * v.gtr / da_sq,
                        2.0 / m.den_reference - 2.0 * v.gtr / db_sq,
                    ),
                );
                put(c.gx, d(-2.0 * v.gtr / da_sq, -2.0 * v.gtr / db_sq));
                put(c.w0, d(Complex64::new(0.0, 0.0), -4.0 * i * v.gtr / db_sq));
                put(c.gt, d(-2.0 * v.gtr / da_sq, Complex64::new(0.0, 0.0)));
                put(c.wv, d(-4.0 * i * v.gtr / da_sq, Complex64::new(0.0, 0.0)));
                let fano = c.fano.unwrap();
                put(
                    Some(fano),
                    d(Complex64::new(-1.0, 0.0), Complex64::new(0.0, 0.0)),
                );
                put(Some(fano + 1), d(-i, Complex64::new(0.0, 0.0)));
                row += 2;
            }
        }
        Some(jac)
    }
}

fn pack(layout: &Layout, inits: &[ReflectionFitParams], s: &Scaling) -> Vec<f64> {
    let mut p = vec![0.0; layout.len()];
    for (t, init) in inits.iter().enumerate() {
        let c = layout.columns(t);
        if let Some(k) = c.gtr {
            p[k] = init.gamma_tr / UNIT;
        }
        if let Some(k) = c.gx {
            p[k] = init.gamma_x / UNIT;
        }
        if let Some(k) = c.w0 {
            p[k] = s.omega_to_scaled(init.reference_resonance);
        }
        p[c.gt.unwrap()] = init.gamma_t / UNIT;
        let f = c.fano.unwrap();
        p[f] = init.fano.re;
        p[f + 1] = init.fano.im;
        p[c.wv.unwrap()] = s.omega_to_scaled(init.resonance);
    }
    p
}

fn unpack(problem: &RatioProblem, p: &[f64], t: usize, s: &Scaling) -> ReflectionFitParams {
    let v = problem.values(p, t);
    ReflectionFitParams {
        gamma_tr: v.gtr * UNIT,
        gamma_x: v.gx * UNIT,
        gamma_t: v.gt * UNIT,
        fano: v.fano,
        resonance: s.omega_from_scaled(v.wv),
        reference_resonance: s.omega_from_scaled(v.w0),
        reference_gamma_t: problem.gt0 * UNIT,
    }
}

fn trace_rms(problem: &RatioProblem, residuals: &DVector<f64>, t: usize) -> f64 {
    let start: usize = 2 * problem.traces[..t].iter().map(|x| x.w.len()).sum::<usize>();
    let n = problem.traces[t].w.len();
    let ss: f64 = residuals.rows(start, 2 * n).norm_squared();
    (ss / n as f64).sqrt()
}

fn check_normalized(traces: &[ReflectionTrace]) -> Result<()> {
    if traces.is_empty() {
        return Err(Error::input("no reflection traces to fit"));
    }
    for t in traces {
        t.validate()?;
        if !t.normalized {
            return Err(Error::input(format!(
                "trace at V_b = {} V is not normalized by the zero-bias trace",
                t.bias.full_voltage()
            )));
        }
    }
    Ok(())
}

fn run(
    traces: &[ReflectionTrace],
    inits: &[ReflectionFitParams],
    layout: Layout,
    opts: &FitOptions,
) -> Result<(RatioProblem, Scaling, LmReport)> {
    for init in inits {
        init.validate()?;
    }
    let s = Scaling::for_trace(&traces[0]);
    let problem = RatioProblem {
        traces: traces.iter().map(|t| ScaledTrace::new(t, &s)).collect(),
        layout,
        gt0: inits[0].reference_gamma_t / UNIT,
        frozen: [
            inits[0].gamma_tr / UNIT,
            inits[0].gamma_x / UNIT,
            s.omega_to_scaled(inits[0].reference_resonance),
        ],
    };
    let x0 = pack(&layout, inits, &s);
    let report = levenberg_marquardt(&problem, &x0, &opts.lm).map_err(|e| match e {
        Error::Fit { reason, best } => Error::Fit {
            reason: format!("reflection fit: {reason}"),
            best: best.map(|b| {
                // Report the best-so-far values in SI units for the first trace.
                let p = unpack(&problem, &b, 0, &s);
                vec![
                    p.gamma_tr,
                    p.gamma_x,
                    p.gamma_t,
                    p.fano.re,
                    p.fano.im,
                    p.resonance,
                    p.reference_resonance,
                ]
            }),
        },
        other => other,
    })?;
    Ok((problem, s, report))
}

/// Fits one normalized trace by nonlinear least squares on the stacked real and imaginary
/// residuals.
///
/// `init` supplies the starting point; with [`SharedMode::Frozen`] its `gamma_tr`, `gamma_x`
/// and `reference_resonance` are held fixed. `reference_gamma_t` is always held fixed.
pub fn fit_normalized_trace(
    trace: &ReflectionTrace,
    init: &ReflectionFitParams,
    mode: SharedMode,
    opts: &FitOptions,
) -> Result<TraceFit> {
    check_normalized(std::slice::from_ref(trace))?;
    let layout = Layout {
        n_traces: 1,
        shared_free: mode == SharedMode::Free,
        share_fano: false,
    };
    let (problem, s, report) = run(
        std::slice::from_ref(trace),
        std::slice::from_ref(init),
        layout,
        opts,
    )?;
    Ok(TraceFit {
        bias: trace.bias,
        params: unpack(&problem, &report.params, 0, &s),
        rms_residual: trace_rms(&problem, &report.residuals, 0),
        iterations: report.iterations,
    })
}

/// Joint fit of all normalized traces with shared `γ_tr`, `γ_x` and reference resonance.
///
/// `inits[k]` is the starting point for `traces[k]`; the shared values come from `inits[0]`.
pub fn fit_reflection_set(
    traces: &[ReflectionTrace],
    inits: &[ReflectionFitParams],
    opts: &FitOptions,
) -> Result<JointFit> {
    check_normalized(traces)?;
    if inits.len() != traces.len() {
        return Err(Error::Shape(format!(
            "{} traces but {} initial guesses",
            traces.len(),
            inits.len()
        )));
    }
    if let Some(t) = traces
        .iter()
        .find(|t| t.frequencies != traces[0].frequencies)
    {
        return Err(Error::Shape(format!(
            "trace at V_b = {} V uses a different frequency grid",
            t.bias.full_voltage()
        )));
    }
    let layout = Layout {
        n_traces: traces.len(),
        shared_free: true,
        share_fano: opts.share_fano,
    };
    let (problem, s, report) = run(traces, inits, layout, opts)?;
    let fits: Vec<TraceFit> = traces
        .iter()
        .enumerate()
        .map(|(t, trace)| TraceFit {
            bias: trace.bias,
            params: unpack(&problem, &report.params, t, &s),
            rms_residual: trace_rms(&problem, &report.residuals, t),
            iterations: report.iterations,
        })
        .collect();
    let mut normalized = report.jacobian.clone();
    for mut col in normalized.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
    }
    let mut singular: Vec<f64> = normalized.singular_values().iter().copied().collect();
    singular.sort_by(|a, b| b.total_cmp(a));
    let first = fits[0].params;
    Ok(JointFit {
        gamma_tr: first.gamma_tr,
        gamma_x: first.gamma_x,
        reference_resonance: first.reference_resonance,
        rms_residual: report.rms() * std::f64::consts::SQRT_2,
        iterations: report.iterations,
        jacobian_singular_values: singular,
        traces: fits,
    })
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    (0..n).map(|k| lo * ratio.powi(k as i32)).collect()
}

/// Starting point for [`fit_reflection_set`] from the traces alone.
///
/// The reference resonance is taken where `|Γ^N|` peaks (the narrow zero-bias dip in the
/// denominator), then `γ_tr`, `γ_x` and every `γ_T` come from a coarse logarithmic grid search
/// with `r = 1` and the biased resonance placed at the reference resonance.
pub fn initial_guess(
    traces: &[ReflectionTrace],
    reference_gamma_t: f64,
) -> Result<Vec<ReflectionFitParams>> {
    check_normalized(traces)?;
    let s = Scaling::for_trace(&traces[0]);
    let scaled: Vec<ScaledTrace> = traces
        .iter()
        .map(|t| {
            let full = ScaledTrace::new(t, &s);
            let stride = (full.w.len() / 81).max(1);
            ScaledTrace {
                w: full.w.iter().step_by(stride).copied().collect(),
                data: full.data.iter().step_by(stride).copied().collect(),
            }
        })
        .collect();

    let mut peaks: Vec<f64> = traces
        .iter()
        .map(|t| {
            let (k, _) = t
                .values
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                .expect("trace is non-empty");
            s.omega_to_scaled(angular(t.frequencies[k]))
        })
        .collect();
    peaks.sort_by(f64::total_cmp);
    let w0 = peaks[peaks.len() / 2];

    let span = {
        let f = &traces[0].frequencies;
        angular(f[f.len() - 1] - f[0]) / UNIT
    };
    let rate_grid = geometric(span * 2e-4, span * 0.5, 18);
    let gt_grid = geometric(span * 2e-4, span, 28);
    let gt0 = reference_gamma_t / UNIT;

    let mut best = (f64::INFINITY, 0.0, 0.0, vec![0.0; traces.len()]);
    for &gtr in &rate_grid {
        for &gx in &rate_grid {
            let mut total = 0.0;
            let mut chosen = Vec::with_capacity(traces.len());
            for trace in &scaled {
                let mut trace_best = (f64::INFINITY, gt_grid[0]);
                for &gt in &gt_grid {
                    let v = Values {
                        gtr,
                        gx,
                        w0,
                        gt,
                        fano: Complex64::new(1.0, 0.0),
                        wv: w0,
                    };
                    let cost: f64 = trace
                        .w
                        .iter()
                        .zip(&trace.data)
                        .map(|(w, d)| (point_model(*w, &v, gt0).ratio - d).norm_sqr())
                        .sum();
                    if cost < trace_best.0 {
                        trace_best = (cost, gt);
                    }
                }
                total += trace_best.0;
                chosen.push(trace_best.1);
            }
            if total < best.0 {
                best = (total, gtr, gx, chosen);
            }
        }
    }
    let (_, gtr, gx, gts) = best;
    Ok(gts
        .into_iter()
        .map(|gt| ReflectionFitParams {
            gamma_tr: gtr * UNIT,
            gamma_x: gx * UNIT,
            gamma_t: gt * UNIT,
            fano: Complex64::new(1.0, 0.0),
            resonance: s.omega_from_scaled(w0),
            reference_resonance: s.omega_from_scaled(w0),
            reference_gamma_t,
        })
        .collect())
}

/// Least-squares `γ̄_T` from `γ_T(V_b) = γ̄_T [1 + Δ²/(2(eV)²)]` with `γ̄_T` the only free
/// parameter.
///
/// The uncertainty is the residual-based standard error, `None` with a single point.
pub fn extract_asymptotic_damping(points: &[(Bias, f64)], gap: f64) -> Result<Estimate> {
    if points.is_empty() {
        return Err(Error::domain("no damping rates to extrapolate"));
    }
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut xs = Vec::with_capacity(points.len());
    for &(bias, gamma_t) in points {
        if !(bias.reduced(gap) > 1.0) {
            return Err(Error::domain(format!(
                "bias {} V is not above the gap (eV_b/2Δ = {:.3})",
                bias.full_voltage(),
                bias.reduced(gap)
            )));
        }
        let x = damping_rate_highbias(bias, gap, 1.0)?;
        sxx += x * x;
        sxy += x * gamma_t;
        xs.push(x);
    }
    let value = sxy / sxx;
    let sigma = if points.len() >= 2 {
        let rss: f64 = points
            .iter()
            .zip(&xs)
            .map(|(&(_, g), x)| (g - value * x).powi(2))
            .sum();
        Some((rss / (points.len() - 1) as f64 / sxx).sqrt())
    } else {
        None
    };
    Ok(Estimate { value, sigma })
}
