use std::fmt::Write as _;
use std::io::Write;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::hilbert::C64;

/// Recorded scalars on a time grid, one column per name.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    columns: Vec<Vec<f64>>,
    pub snapshots: Vec<Array2<C64>>,
}

/// Worst-case CPTP diagnostics over a run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Quality {
    pub trace_drift: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
}

impl Quality {
    pub fn merge(self, o: Quality) -> Quality {
        Quality {
            trace_drift: self.trace_drift.max(o.trace_drift),
            hermiticity: self.hermiticity.max(o.hermiticity),
            min_eigenvalue: self.min_eigenvalue.min(o.min_eigenvalue),
        }
    }

    pub fn ok(&self) -> bool {
        self.trace_drift <= 1e-6 && self.hermiticity <= 1e-8 && self.min_eigenvalue >= -1e-6
    }
}

impl Trajectory {
    pub fn new(names: Vec<String>) -> Self {
        let columns = vec![Vec::new(); names.len()];
        Self { times: Vec::new(), names, columns, snapshots: Vec::new() }
    }

    pub fn push(&mut self, t: f64, values: &[f64]) -> Result<()> {
        if values.len() != self.names.len() {
            return Err(Error::Argument(format!("expected {} values, got {}", self.names.len(), values.len())));
        }
        if let Some(&last) = self.times.last() {
            if t < last {
                return Err(Error::Argument("trajectory times must increase".into()));
            }
        }
        self.times.push(t);
        for (c, v) in self.columns.iter_mut().zip(values) {
            c.push(*v);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|k| self.columns[k].as_slice())
    }

    /// Adds a derived column; its length must match the time grid.
    pub fn add_column(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.times.len() {
            return Err(Error::Argument(format!("column {name} has {} rows, expected {}", values.len(), self.times.len())));
        }
        self.names.push(name.to_string());
        self.columns.push(values);
        Ok(())
    }

    /// Diagnostics from the `trace`, `herm_err` and `min_eig` columns when present.
    pub fn quality(&self) -> Quality {
        let worst = |name: &str, f: fn(f64, f64) -> f64, init: f64, map: fn(f64) -> f64| {
            self.column(name).map(|c| c.iter().fold(init, |a, &v| f(a, map(v)))).unwrap_or(init)
        };
        Quality {
            trace_drift: worst("trace", f64::max, 0.0, |v| (v - 1.0).abs()),
            hermiticity: worst("herm_err", f64::max, 0.0, |v| v),
            min_eigenvalue: worst("min_eig", f64::min, 0.0, |v| v),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for n in &self.names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            let _ = write!(s, "{}", fmt_f64(*t));
            for c in &self.columns {
                let _ = write!(s, ",{}", fmt_f64(c[i]));
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }
}

/// Seventeen significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        // avoid "-0"
        return format!("{:.16e}", 0.0);
    }
    format!("{v:.16e}")
}
