//! Master-equation propagation, steady states and correlators.

pub mod correlator;
pub mod liouvillian;
pub mod modal;
pub mod rk4;
pub mod steady;
pub mod trajectory;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::hilbert::{hermiticity_error, min_eigenvalue, DensityMatrix, Operator, C64};
use crate::models::{LindbladSet, Pulse};

pub use correlator::{regression_correlator, regression_modes, sample_uniform, CorrelatorMode};
pub use liouvillian::Liouvillian;
pub use modal::{ModalPropagator, Modes, Strategy};
pub use rk4::{InteractionModel, Rk4Options};
pub use steady::{steady_state, steady_state_closed_form, ClosedFormSteady, SteadyState};
pub use trajectory::{fmt_f64, Quality, Trajectory};

/// Pulsed term `f(t) * op` added to the static Hamiltonian.
#[derive(Clone, Debug)]
pub struct Drive {
    pub op: Operator,
    pub pulse: Pulse,
}

#[derive(Clone, Debug)]
pub struct Model {
    pub h: Operator,
    pub drive: Option<Drive>,
    pub lindblads: LindbladSet,
    /// Basis for the RK4 interaction picture (columns in the original basis).
    pub frame: Option<Array2<C64>>,
}

impl Model {
    pub fn new(h: Operator, lindblads: LindbladSet) -> Self {
        Self { h, drive: None, lindblads, frame: None }
    }

    pub fn with_drive(mut self, op: Operator, pulse: Pulse) -> Self {
        self.drive = Some(Drive { op, pulse });
        self
    }

    pub fn with_frame(mut self, frame: Array2<C64>) -> Self {
        self.frame = Some(frame);
        self
    }

    pub fn is_time_dependent(&self) -> bool {
        self.drive.is_some()
    }

    /// Hamiltonian at time `t`.
    pub fn hamiltonian_at(&self, t: f64) -> Operator {
        match &self.drive {
            Some(d) => &self.h + &d.op.scale_re(d.pulse.amplitude(t)),
            None => self.h.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Liouvillian eigenmodes; time-independent models only.
    ExpmEig,
    Rk4,
}

type ProbeFn = dyn Fn(&Array2<C64>) -> Result<f64> + Send + Sync;

/// A named scalar recorded along a trajectory.
pub struct Probe {
    pub name: String,
    kind: ProbeKind,
}

enum ProbeKind {
    Expect(Array2<C64>),
    Func(Box<ProbeFn>),
}

impl Probe {
    /// Real part of `Tr[op rho]`.
    pub fn expect(name: &str, op: &Operator) -> Self {
        Self { name: name.to_string(), kind: ProbeKind::Expect(op.data().clone()) }
    }

    pub fn func(name: &str, f: impl Fn(&Array2<C64>) -> Result<f64> + Send + Sync + 'static) -> Self {
        Self { name: name.to_string(), kind: ProbeKind::Func(Box::new(f)) }
    }

    pub fn eval(&self, rho: &Array2<C64>) -> Result<f64> {
        match &self.kind {
            ProbeKind::Expect(o) => Ok(crate::hilbert::expect(rho, o).re),
            ProbeKind::Func(f) => f(rho),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EvolveOptions {
    pub strategy: Strategy,
    pub rk4: Rk4Options,
    /// Keep the density matrix at every grid point.
    pub snapshots: bool,
    /// Record `trace`, `herm_err` and `min_eig` columns.
    pub diagnostics: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { strategy: Strategy::Auto, rk4: Rk4Options::default(), snapshots: false, diagnostics: true }
    }
}

/// Propagates several initial matrices; result is indexed `[time][input]`.
pub fn propagate(
    model: &Model,
    inputs: &[Array2<C64>],
    times: &[f64],
    method: Method,
    opts: &EvolveOptions,
) -> Result<Vec<Vec<Array2<C64>>>> {
    let d = model.h.dim();
    if inputs.iter().any(|r| r.dim() != (d, d)) {
        return Err(Error::Layout("initial matrix does not match the model".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Argument("time grid must be increasing".into()));
    }
    let out = match method {
        Method::ExpmEig => {
            if model.is_time_dependent() {
                return Err(Error::Unsupported("eigenmode propagation needs a time-independent model".into()));
            }
            let refs: Vec<&Array2<C64>> = inputs.iter().collect();
            let prop = ModalPropagator::new(&model.h, &model.lindblads, opts.strategy, &refs)?;
            let t0 = times.first().copied().unwrap_or(0.0);
            let exps = inputs.iter().map(|r| prop.expand(r)).collect::<Result<Vec<_>>>()?;
            times.iter().map(|&t| exps.iter().map(|e| prop.state(e, t - t0)).collect()).collect()
        }
        Method::Rk4 => {
            let drive = model.drive.as_ref().map(|d| (&d.op, d.pulse));
            let im = InteractionModel::new(&model.h, drive, &model.lindblads, model.frame.as_ref())?;
            let mut out = Vec::with_capacity(times.len());
            im.propagate(inputs, times, &opts.rk4, |_, s| {
                out.push(s.to_vec());
                Ok(())
            })?;
            out
        }
    };
    for states in &out {
        for s in states {
            if s.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Numerical("non-finite density matrix".into()));
            }
        }
    }
    Ok(out)
}

/// Evolves `rho0` and records every probe on the grid.
pub fn evolve(
    rho0: &DensityMatrix,
    model: &Model,
    times: &[f64],
    method: Method,
    probes: &[Probe],
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    if rho0.layout() != model.h.layout() {
        return Err(Error::Layout(format!(
            "state layout {:?} differs from model layout {:?}",
            rho0.layout().dims(),
            model.h.layout().dims()
        )));
    }
    let states = propagate(model, &[rho0.matrix().clone()], times, method, opts)?;
    let mut names: Vec<String> = probes.iter().map(|p| p.name.clone()).collect();
    if opts.diagnostics {
        names.extend(["trace", "herm_err", "min_eig"].map(String::from));
    }
    let mut traj = Trajectory::new(names);
    for (&t, s) in times.iter().zip(states) {
        let rho = &s[0];
        let mut row = probes.iter().map(|p| p.eval(rho)).collect::<Result<Vec<_>>>()?;
        if opts.diagnostics {
            row.push(rho.diag().sum().re);
            row.push(hermiticity_error(rho));
            row.push(min_eigenvalue(&crate::hilbert::hermitize(rho))?);
        }
        traj.push(t, &row)?;
        if opts.snapshots {
            traj.snapshots.push(rho.clone());
        }
    }
    Ok(traj)
}

/// CPTP diagnostics of a single matrix.
pub fn quality_of(rho: &Array2<C64>) -> Result<Quality> {
    Ok(Quality {
        trace_drift: (rho.diag().sum() - C64::new(1.0, 0.0)).norm(),
        hermiticity: hermiticity_error(rho),
        min_eigenvalue: min_eigenvalue(&crate::hilbert::hermitize(rho))?,
    })
}
