//! Fixed-step time integration with input disturbances and channel recording.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::assembly::SystemModel;
use crate::config::{Method, SimulationConfig};
use crate::error::{Error, Result};

/// States larger than this abort the run.
pub const BLOW_UP: f64 = 1e6;
const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX: usize = 12;

/// Anything with a vector field and an output map.
pub trait Dynamics: Sync {
    fn n_states(&self) -> usize;
    fn n_inputs(&self) -> usize;
    fn vector_field(&self, x: &[f64], u: &[f64], dx: &mut [f64]);
    fn outputs(&self, x: &[f64]) -> Vec<f64>;
    /// Reason the state is physically inadmissible, if it is.
    fn inadmissible(&self, _x: &[f64]) -> Option<String> {
        None
    }
}

impl Dynamics for SystemModel {
    fn n_states(&self) -> usize {
        SystemModel::n_states(self)
    }
    fn n_inputs(&self) -> usize {
        SystemModel::n_inputs(self)
    }
    fn vector_field(&self, x: &[f64], u: &[f64], dx: &mut [f64]) {
        SystemModel::vector_field(self, x, u, dx)
    }
    fn outputs(&self, x: &[f64]) -> Vec<f64> {
        SystemModel::outputs(self, x)
    }
    fn inadmissible(&self, x: &[f64]) -> Option<String> {
        SystemModel::inadmissible(self, x)
    }
}

/// `ẋ = Ax + Bu`, `y = Cx`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl Dynamics for LinearSystem {
    fn n_states(&self) -> usize {
        self.a.nrows()
    }
    fn n_inputs(&self) -> usize {
        self.b.ncols()
    }
    fn vector_field(&self, x: &[f64], u: &[f64], dx: &mut [f64]) {
        let r = &self.a * DVector::from_column_slice(x) + &self.b * DVector::from_column_slice(u);
        dx.copy_from_slice(r.as_slice());
    }
    fn outputs(&self, x: &[f64]) -> Vec<f64> {
        (&self.c * DVector::from_column_slice(x)).as_slice().to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Waveform {
    Step,
    Pulse { duration: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    pub input: usize,
    pub magnitude: f64,
    pub start: f64,
    pub waveform: Waveform,
}

impl Disturbance {
    pub fn value(&self, t: f64) -> f64 {
        let on = match self.waveform {
            Waveform::Step => t >= self.start,
            Waveform::Pulse { duration } => t >= self.start && t < self.start + duration,
        };
        if on {
            self.magnitude
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    pub t_end: f64,
    pub method: Method,
    pub decimation: usize,
    pub disturbances: Vec<Disturbance>,
}

impl SimOptions {
    /// Options from a case file section; the disturbance input is resolved
    /// against `input_devices` (device names in input order).
    pub fn from_config(cfg: &SimulationConfig, input_devices: &[String]) -> Result<Self> {
        let disturbances = match &cfg.disturbance {
            None => Vec::new(),
            Some(p) => {
                let input = input_devices
                    .iter()
                    .position(|d| *d == p.input)
                    .ok_or_else(|| Error::InvalidArgument(format!("disturbance input {} is not a model input", p.input)))?;
                vec![Disturbance {
                    input,
                    magnitude: p.magnitude,
                    start: p.start,
                    waveform: Waveform::Pulse { duration: p.duration },
                }]
            }
        };
        Ok(Self {
            dt: cfg.dt,
            t_end: cfg.t_end,
            method: cfg.method,
            decimation: cfg.decimation.max(1),
            disturbances,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub time: Vec<f64>,
    /// One row per recorded instant, one column per output channel.
    pub samples: Vec<Vec<f64>>,
    pub events: Vec<Event>,
    /// State at the last completed step.
    pub final_state: Vec<f64>,
}

impl SimResult {
    pub fn channel(&self, k: usize) -> Vec<f64> {
        self.samples.iter().map(|row| row[k]).collect()
    }

    pub fn aborted(&self) -> bool {
        !self.events.is_empty()
    }
}

fn input_at(u0: &[f64], dist: &[Disturbance], t: f64) -> Vec<f64> {
    let mut u = u0.to_vec();
    for d in dist {
        u[d.input] += d.value(t);
    }
    u
}

fn rk4_step<D: Dynamics + ?Sized>(sys: &D, x: &mut [f64], t: f64, h: f64, u0: &[f64], dist: &[Disturbance], work: &mut [Vec<f64>; 5]) {
    let n = x.len();
    let [k1, k2, k3, k4, tmp] = work;
    let u_a = input_at(u0, dist, t);
    let u_m = input_at(u0, dist, t + 0.5 * h);
    let u_b = input_at(u0, dist, t + h);
    sys.vector_field(x, &u_a, k1);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    sys.vector_field(tmp, &u_m, k2);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    sys.vector_field(tmp, &u_m, k3);
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    sys.vector_field(tmp, &u_b, k4);
    for i in 0..n {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

fn jacobian<D: Dynamics + ?Sized>(sys: &D, x: &[f64], u: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let mut a = DMatrix::zeros(n, n);
    let (mut fp, mut fm) = (vec![0.0; n], vec![0.0; n]);
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = 1e-6 * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        sys.vector_field(&xp, u, &mut fp);
        xp[j] = x[j] - h;
        sys.vector_field(&xp, u, &mut fm);
        xp[j] = x[j];
        for i in 0..n {
            a[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    a
}

struct Trapezoidal {
    lu: Option<LU<f64, Dyn, Dyn>>,
}

impl Trapezoidal {
    fn factor<D: Dynamics + ?Sized>(sys: &D, x: &[f64], u: &[f64], h: f64) -> Result<LU<f64, Dyn, Dyn>> {
        let n = x.len();
        let m = DMatrix::identity(n, n) - jacobian(sys, x, u) * (0.5 * h);
        let lu = m.lu();
        if !lu.is_invertible() {
            return Err(Error::Singular("trapezoidal iteration matrix"));
        }
        Ok(lu)
    }

    /// Solves `x₁ = x₀ + h/2 (f(x₀) + f(x₁))` by Newton with a cached
    /// iteration matrix, refreshing it once if the iteration stalls.
    fn step<D: Dynamics + ?Sized>(&mut self, sys: &D, x: &mut [f64], t: f64, h: f64, u0: &[f64], dist: &[Disturbance]) -> Result<()> {
        let n = x.len();
        let u_a = input_at(u0, dist, t);
        let u_b = input_at(u0, dist, t + h);
        let mut f0 = vec![0.0; n];
        sys.vector_field(x, &u_a, &mut f0);
        let base: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * f0[i]).collect();
        let mut x1: Vec<f64> = (0..n).map(|i| x[i] + h * f0[i]).collect();
        let mut f1 = vec![0.0; n];
        for attempt in 0..2 {
            if self.lu.is_none() || attempt == 1 {
                self.lu = Some(Self::factor(sys, &x1, &u_b, h)?);
            }
            let lu = self.lu.as_ref().expect("factored");
            for _ in 0..NEWTON_MAX {
                sys.vector_field(&x1, &u_b, &mut f1);
                let g = DVector::from_fn(n, |i, _| x1[i] - base[i] - 0.5 * h * f1[i]);
                let d = lu.solve(&g).ok_or(Error::Singular("trapezoidal iteration matrix"))?;
                let scale = x1.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                for i in 0..n {
                    x1[i] -= d[i];
                }
                if d.amax() < NEWTON_TOL * scale {
                    x.copy_from_slice(&x1);
                    return Ok(());
                }
            }
        }
        Err(Error::Singular("trapezoidal Newton iteration did not converge"))
    }
}

/// Integrates from `x0` and records the outputs every `decimation` steps.
pub fn integrate<D: Dynamics + ?Sized>(sys: &D, x0: &[f64], u0: &[f64], opts: &SimOptions) -> Result<SimResult> {
    if !(opts.dt > 0.0 && opts.t_end > 0.0) {
        return Err(Error::InvalidArgument("dt and t_end must be positive".into()));
    }
    if x0.len() != sys.n_states() || u0.len() != sys.n_inputs() {
        return Err(Error::InvalidArgument("initial state or input has the wrong dimension".into()));
    }
    if let Some(d) = opts.disturbances.iter().find(|d| d.input >= u0.len()) {
        return Err(Error::InvalidArgument(format!("disturbance targets missing input {}", d.input)));
    }
    let steps = (opts.t_end / opts.dt).round() as usize;
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut work = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut trap = Trapezoidal { lu: None };
    let mut time = vec![0.0];
    let mut samples = vec![sys.outputs(&x)];
    let mut events = Vec::new();
    for k in 0..steps {
        let t = k as f64 * opts.dt;
        match opts.method {
            Method::Rk4 => rk4_step(sys, &mut x, t, opts.dt, u0, &opts.disturbances, &mut work),
            Method::Trapezoidal => {
                let mut trial = x.clone();
                if let Err(e) = trap.step(sys, &mut trial, t, opts.dt, u0, &opts.disturbances) {
                    events.push(Event {
                        time: t,
                        message: e.to_string(),
                    });
                    break;
                }
                x = trial;
            }
        }
        let t1 = (k + 1) as f64 * opts.dt;
        let big = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bad = sys
            .inadmissible(&x)
            .or_else(|| (big > BLOW_UP).then(|| format!("state magnitude {big:.3e} exceeds {BLOW_UP:e}")));
        if let Some(message) = bad {
            events.push(Event { time: t1, message });
            break;
        }
        if (k + 1) % opts.decimation == 0 {
            time.push(t1);
            samples.push(sys.outputs(&x));
        }
    }
    Ok(SimResult {
        time,
        samples,
        events,
        final_state: x,
    })
}

/// Output sample at `x`; the same map the linearization differentiates.
pub fn record_channels(model: &SystemModel, x: &[f64]) -> Vec<f64> {
    model.outputs(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator() -> LinearSystem {
        LinearSystem {
            a: DMatrix::from_row_slice(2, 2, &[-1.0, 20.0, -20.0, -1.0]),
            b: DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            c: DMatrix::identity(2, 2),
        }
    }

    fn exact(t: f64) -> [f64; 2] {
        let e = (-t).exp();
        [e * (20.0 * t).cos(), -e * (20.0 * t).sin()]
    }

    fn opts(method: Method, dt: f64) -> SimOptions {
        SimOptions {
            dt,
            t_end: 1.0,
            method,
            decimation: 1,
            disturbances: Vec::new(),
        }
    }

    #[test]
    fn rk4_matches_matrix_exponential() {
        let r = integrate(&oscillator(), &[1.0, 0.0], &[0.0], &opts(Method::Rk4, 1e-4)).unwrap();
        let last = r.samples.last().unwrap();
        let ex = exact(1.0);
        assert!((last[0] - ex[0]).abs() < 1e-8 && (last[1] - ex[1]).abs() < 1e-8);
    }

    #[test]
    fn trapezoidal_is_second_order() {
        let err = |dt: f64| {
            let r = integrate(&oscillator(), &[1.0, 0.0], &[0.0], &opts(Method::Trapezoidal, dt)).unwrap();
            let last = r.samples.last().unwrap();
            (last[0] - exact(1.0)[0]).abs()
        };
        let ratio = err(2e-3) / err(1e-3);
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn pulse_shapes_input() {
        let d = Disturbance {
            input: 0,
            magnitude: 2.0,
            start: 0.1,
            waveform: Waveform::Pulse { duration: 0.1 },
        };
        assert_eq!(d.value(0.05), 0.0);
        assert_eq!(d.value(0.15), 2.0);
        assert_eq!(d.value(0.25), 0.0);
    }

    #[test]
    fn blow_up_is_an_event() {
        let sys = LinearSystem {
            a: DMatrix::from_element(1, 1, 50.0),
            b: DMatrix::zeros(1, 1),
            c: DMatrix::identity(1, 1),
        };
        let r = integrate(&sys, &[1.0], &[0.0], &opts(Method::Rk4, 1e-3)).unwrap();
        assert!(r.aborted());
        assert!(r.time.last().unwrap() < &1.0);
        assert!(r.samples.iter().flatten().all(|v| v.is_finite()));
    }
}
