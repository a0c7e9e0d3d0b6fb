use nalgebra::DVector;

use super::{Generator, LinsysError, C64};

/// Step-size control for the adaptive Runge–Kutta integrator.
#[derive(Clone, Copy, Debug)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, max_steps: 50_000_000 }
    }
}

/// Expectation values sampled on a time grid, ordered as the generator basis.
#[derive(Clone, Debug)]
pub struct ExpectationTrajectory {
    pub t_grid: Vec<f64>,
    pub values: Vec<DVector<C64>>,
}

/// One-time expectation vector at a known absolute time.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub values: DVector<C64>,
}

impl ExpectationTrajectory {
    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    pub fn component(&self, k: usize) -> Vec<C64> {
        self.values.iter().map(|v| v[k]).collect()
    }

    pub fn snapshot(&self, i: usize) -> Snapshot {
        Snapshot { t: self.t_grid[i], values: self.values[i].clone() }
    }

    pub fn last(&self) -> Snapshot {
        self.snapshot(self.len() - 1)
    }
}

// Dormand–Prince 5(4) tableau; the stage abscissae are unused since M is constant.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Workspace {
    k: [DVector<C64>; 7],
    tmp: DVector<C64>,
    y_new: DVector<C64>,
}

fn combine(out: &mut DVector<C64>, y: &DVector<C64>, h: f64, terms: &[(f64, &DVector<C64>)]) {
    out.copy_from(y);
    for &(a, k) in terms {
        if a != 0.0 {
            out.axpy(C64::new(h * a, 0.0), k, C64::new(1.0, 0.0));
        }
    }
}

/// Integrates `dy/dt = M y` and samples the solution on `t_grid`.
///
/// `t_grid` must be ascending and start at 0; the first sample is `y0` itself.
pub fn integrate(
    gen: &Generator,
    y0: &DVector<C64>,
    t_grid: &[f64],
    opts: &IntegratorOptions,
) -> Result<ExpectationTrajectory, LinsysError> {
    let n = gen.dim();
    if y0.len() != n {
        return Err(LinsysError::DimensionMismatch { expected: n, found: y0.len() });
    }
    if y0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LinsysError::NonFinite("initial state"));
    }
    validate_grid(t_grid)?;

    let zero = DVector::<C64>::zeros(n);
    let mut ws = Workspace {
        k: std::array::from_fn(|_| zero.clone()),
        tmp: zero.clone(),
        y_new: zero,
    };
    let mut y = y0.clone();
    let mut values = Vec::with_capacity(t_grid.len());
    values.push(y.clone());

    let norm = gen.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max) * n as f64;
    let mut h = if norm > 0.0 { 0.1 / norm } else { f64::INFINITY };
    let mut t = 0.0;
    let mut steps = 0usize;
    gen.apply(&y, &mut ws.k[0]);

    for &t_next in &t_grid[1..] {
        while t < t_next {
            let remaining = t_next - t;
            let last = h >= remaining;
            let h_try = if last { remaining } else { h };
            dopri_step(gen, &y, h_try, &mut ws);
            steps += 1;
            if steps > opts.max_steps {
                return Err(LinsysError::StepUnderflow { t });
            }
            let scale_err = error_norm(&y, &ws, h_try, opts);
            if !scale_err.is_finite() {
                return Err(LinsysError::NonFinite("integrator state"));
            }
            if scale_err <= 1.0 {
                t = if last { t_next } else { t + h_try };
                std::mem::swap(&mut y, &mut ws.y_new);
                // first-same-as-last
                ws.k.swap(0, 6);
                let factor = if scale_err == 0.0 { 5.0 } else { (0.9 * scale_err.powf(-0.2)).clamp(0.2, 5.0) };
                // a step clipped to the grid says nothing about the natural step
                if !(last && h_try < h) {
                    h = h_try * factor;
                }
            } else {
                h = h_try * (0.9 * scale_err.powf(-0.2)).clamp(0.2, 1.0);
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(LinsysError::StepUnderflow { t });
                }
            }
        }
        values.push(y.clone());
    }

    Ok(ExpectationTrajectory { t_grid: t_grid.to_vec(), values })
}

fn dopri_step(gen: &Generator, y: &DVector<C64>, h: f64, ws: &mut Workspace) {
    let Workspace { k, tmp, y_new } = ws;
    let [k1, k2, k3, k4, k5, k6, k7] = k;
    combine(tmp, y, h, &[(A21, k1)]);
    gen.apply(tmp, k2);
    combine(tmp, y, h, &[(A31, k1), (A32, k2)]);
    gen.apply(tmp, k3);
    combine(tmp, y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
    gen.apply(tmp, k4);
    combine(tmp, y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
    gen.apply(tmp, k5);
    combine(tmp, y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
    gen.apply(tmp, k6);
    combine(y_new, y, h, &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)]);
    gen.apply(y_new, k7);
}

fn error_norm(y: &DVector<C64>, ws: &Workspace, h: f64, opts: &IntegratorOptions) -> f64 {
    let [k1, _, k3, k4, k5, k6, k7] = &ws.k;
    let n = y.len();
    let mut acc = 0.0;
    for i in 0..n {
        let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
        let sc = opts.atol + opts.rtol * y[i].norm().max(ws.y_new[i].norm());
        acc += (e.norm() / sc).powi(2);
    }
    (acc / n as f64).sqrt()
}

pub(crate) fn validate_grid(t_grid: &[f64]) -> Result<(), LinsysError> {
    match t_grid.first() {
        None => return Err(LinsysError::InvalidGrid("empty time grid".into())),
        Some(&t0) if t0 != 0.0 => return Err(LinsysError::InvalidGrid(format!("grid must start at 0, found {t0}"))),
        _ => {}
    }
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(LinsysError::InvalidGrid("non-finite grid point".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LinsysError::InvalidGrid("grid must be strictly ascending".into()));
    }
    Ok(())
}

/// `n` evenly spaced points on `[0, t_max]`.
pub fn uniform_grid(t_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect(),
    }
}
