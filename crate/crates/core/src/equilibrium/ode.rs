//! Dormand-Prince 5(4) with continuous (dense) output.

use alloc::vec::Vec;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Options {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

/// Why integration stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Halt {
    Completed,
    /// The caller's guard rejected an accepted state.
    Guard,
    StepUnderflow,
    NonFinite,
    MaxSteps,
}

/// One accepted step and its quartic interpolant coefficients.
#[derive(Clone, Debug)]
pub(crate) struct DenseStep<const N: usize> {
    x0: f64,
    h: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    /// Interpolated state and its derivative at `x`.
    fn eval(&self, x: f64) -> ([f64; N], [f64; N]) {
        let t = (x - self.x0) / self.h;
        let s = 1.0 - t;
        let [r1, r2, r3, r4, r5] = &self.r;
        let mut y = [0.0; N];
        let mut dy = [0.0; N];
        for i in 0..N {
            let a = r4[i] + s * r5[i];
            let da = -r5[i];
            let b = r3[i] + t * a;
            let db = a + t * da;
            let c = r2[i] + s * b;
            let dc = -b + s * db;
            y[i] = r1[i] + t * c;
            dy[i] = (c + t * dc) / self.h;
        }
        (y, dy)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Trajectory<const N: usize> {
    pub steps: Vec<DenseStep<N>>,
    pub halt: Halt,
    /// Last accepted abscissa and state.
    pub x: f64,
    pub y: [f64; N],
}

impl<const N: usize> Trajectory<N> {
    /// State and derivative at `x`, or `None` outside the integrated range.
    pub fn eval(&self, x: f64) -> Option<([f64; N], [f64; N])> {
        let first = self.steps.first()?;
        if x < first.x0 || x > self.x {
            return None;
        }
        let k = self.steps.partition_point(|s| s.x0 + s.h < x).min(self.steps.len() - 1);
        Some(self.steps[k].eval(x))
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

/// Fifth-order weights minus the embedded fourth-order weights.
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Integrates `y' = f(x, y)` from `x0` to `x_end > x0`.
///
/// `f` returns `None` for states where the field is undefined; the step is
/// then retried smaller. `stop` is consulted after every accepted step.
pub(crate) fn integrate<const N: usize>(
    mut f: impl FnMut(f64, &[f64; N]) -> Option<[f64; N]>,
    x0: f64,
    y0: [f64; N],
    x_end: f64,
    opts: Options,
    mut stop: impl FnMut(f64, &[f64; N]) -> bool,
) -> Trajectory<N> {
    let mut traj = Trajectory { steps: Vec::new(), halt: Halt::Completed, x: x0, y: y0 };
    let Some(mut k1) = f(x0, &y0) else {
        traj.halt = Halt::NonFinite;
        return traj;
    };
    let span = x_end - x0;
    let mut h = (1e-3 * span).min(opts.h_max);
    let (mut x, mut y) = (x0, y0);

    for _ in 0..opts.max_steps {
        if x >= x_end {
            return traj;
        }
        let last = x + h >= x_end;
        if last {
            h = x_end - x;
        }
        if h <= 1e-15 * (1.0 + libm::fabs(x)) {
            traj.halt = Halt::StepUnderflow;
            return traj;
        }

        let mut k = [[0.0; N]; 7];
        k[0] = k1;
        let mut ok = true;
        for s in 1..7 {
            let mut ys = y;
            for i in 0..N {
                ys[i] += h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
            }
            match f(x + C[s] * h, &ys) {
                Some(v) if v.iter().all(|d| d.is_finite()) => k[s] = v,
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            h *= 0.25;
            continue;
        }

        let mut y1 = y;
        for i in 0..N {
            y1[i] += h * (0..6).map(|j| A[6][j] * k[j][i]).sum::<f64>();
        }
        let mut err = 0.0;
        for i in 0..N {
            let e = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
            let sc = opts.atol + opts.rtol * libm::fabs(y[i]).max(libm::fabs(y1[i]));
            err += (e / sc) * (e / sc);
        }
        let err = libm::sqrt(err / N as f64);
        if !err.is_finite() {
            h *= 0.25;
            continue;
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * libm::pow(err, -0.2)).clamp(0.2, 5.0) };
        if err > 1.0 {
            h *= fac.min(1.0);
            continue;
        }

        let mut r = [[0.0; N]; 5];
        for i in 0..N {
            let dy = y1[i] - y[i];
            let bspl = h * k[0][i] - dy;
            r[0][i] = y[i];
            r[1][i] = dy;
            r[2][i] = bspl;
            r[3][i] = dy - h * k[6][i] - bspl;
            r[4][i] = h * (0..7).map(|j| D[j] * k[j][i]).sum::<f64>();
        }
        traj.steps.push(DenseStep { x0: x, h, r });
        x = if last { x_end } else { x + h };
        y = y1;
        k1 = k[6];
        traj.x = x;
        traj.y = y;
        if y.iter().any(|v| !v.is_finite()) {
            traj.halt = Halt::NonFinite;
            return traj;
        }
        if stop(x, &y) {
            traj.halt = Halt::Guard;
            return traj;
        }
        h = (h * fac).min(opts.h_max);
    }
    if x < x_end {
        traj.halt = Halt::MaxSteps;
    }
    traj
}

#[cfg(test)]
mod tests {
    use super::*;

    const OPTS: Options = Options { rtol: 1e-10, atol: 1e-12, h_max: 0.1, max_steps: 100_000 };

    #[test]
    fn exponential_growth() {
        let t = integrate(|_, y: &[f64; 1]| Some([y[0]]), 0.0, [1.0], 2.0, OPTS, |_, _| false);
        assert_eq!(t.halt, Halt::Completed);
        assert!((t.y[0] - libm::exp(2.0)).abs() < 1e-8);
        // dense output between steps, value and slope
        for x in [0.123, 0.777, 1.5, 1.999] {
            let (y, dy) = t.eval(x).unwrap();
            assert!((y[0] - libm::exp(x)).abs() < 1e-9 * libm::exp(x), "{x}");
            assert!((dy[0] - libm::exp(x)).abs() < 1e-7 * libm::exp(x), "{x}");
        }
        assert!(t.eval(2.5).is_none());
    }

    #[test]
    fn harmonic_oscillator_conserves_phase() {
        let f = |_: f64, y: &[f64; 2]| Some([y[1], -y[0]]);
        let t = integrate(f, 0.0, [0.0, 1.0], 10.0, OPTS, |_, _| false);
        assert!((t.y[0] - libm::sin(10.0)).abs() < 1e-8);
        assert!((t.y[1] - libm::cos(10.0)).abs() < 1e-8);
    }

    #[test]
    fn guard_and_undefined_field() {
        let t = integrate(|_, y: &[f64; 1]| Some([y[0]]), 0.0, [1.0], 5.0, OPTS, |_, y| y[0] > 10.0);
        assert_eq!(t.halt, Halt::Guard);
        assert!(t.x < 5.0 && t.y[0] > 10.0);
        // y' = 1 / (1 - x) blows up at x = 1; the field is undefined past it
        let f = |x: f64, _: &[f64; 1]| if x < 1.0 { Some([1.0 / (1.0 - x)]) } else { None };
        let t = integrate(f, 0.0, [0.0], 2.0, OPTS, |_, _| false);
        assert!(matches!(t.halt, Halt::StepUnderflow | Halt::MaxSteps), "{:?}", t.halt);
        assert!(t.x < 1.0 && t.x > 0.999);
    }
}
