//! Uniform time grids and functions sampled on them.

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform grid t_i = i T / n, i = 0..=n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
        }
        if steps < 2 {
            return Err(Error::Domain(format!("grid needs at least 2 steps, got {steps}")));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        if i == self.steps {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.t(i)).collect()
    }

    /// The grid with every `stride`-th node.
    pub fn coarsen(&self, stride: usize) -> Result<Self> {
        if stride == 0 || !self.steps.is_multiple_of(stride) {
            return Err(Error::Usage(format!("stride {stride} does not divide {} steps", self.steps)));
        }
        Self::new(self.horizon, self.steps / stride)
    }

    pub(crate) fn check_same(&self, other: &TimeGrid) -> Result<()> {
        if self.steps != other.steps || (self.horizon - other.horizon).abs() > 1e-12 * self.horizon {
            return Err(Error::Usage(format!(
                "grid mismatch: ({}, {}) vs ({}, {})",
                self.horizon, self.steps, other.horizon, other.steps
            )));
        }
        Ok(())
    }
}

/// Node values on a grid, read as a piecewise-linear function.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Usage(format!(
                "expected {} node values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.times().into_iter().map(f).collect())
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    /// Builds a function from sampled (t, x) pairs on a uniform grid.
    ///
    /// The time origin is shifted to zero; spacing must be uniform to a
    /// relative tolerance of 1e-6.
    pub fn from_samples(t: &[f64], x: &[f64]) -> Result<Self> {
        if t.len() != x.len() {
            return Err(Error::Usage("time and value columns differ in length".into()));
        }
        if t.len() < 3 {
            return Err(Error::Usage(format!("need at least 3 samples, got {}", t.len())));
        }
        let n = t.len() - 1;
        let horizon = t[n] - t[0];
        if !(horizon > 0.0) {
            return Err(Error::Usage("sample times must increase".into()));
        }
        let dt = horizon / n as f64;
        for (i, w) in t.windows(2).enumerate() {
            let step = w[1] - w[0];
            if (step - dt).abs() > 1e-6 * dt {
                return Err(Error::Usage(format!(
                    "non-uniform spacing at row {}: step {step} vs mean {dt}",
                    i + 1
                )));
            }
        }
        Self::new(TimeGrid::new(horizon, n)?, x.to_vec())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Piecewise-linear interpolation at `t` in [0, T].
    pub fn eval(&self, t: f64) -> f64 {
        let dt = self.grid.dt();
        let n = self.grid.steps();
        let x = (t / dt).clamp(0.0, n as f64);
        let k = (x.floor() as usize).min(n - 1);
        let f = x - k as f64;
        self.values[k] * (1.0 - f) + self.values[k + 1] * f
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(self.grid.t(i), v))
            .collect();
        Self { grid: self.grid, values }
    }

    /// Every `stride`-th node.
    pub fn coarsen(&self, stride: usize) -> Result<Self> {
        let grid = self.grid.coarsen(stride)?;
        let values = self.values.iter().step_by(stride).copied().collect();
        Ok(Self { grid, values })
    }

    pub fn write_csv<W: Write>(&self, out: W, value_header: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", value_header])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([fmt_num(self.grid.t(i)), fmt_num(*v)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a two-column CSV with a header row: time then value.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut t = Vec::new();
        let mut x = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::Usage(format!("row {} has fewer than 2 columns", i + 1)));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Usage(format!("row {}: cannot parse '{s}'", i + 1)))
            };
            t.push(parse(&rec[0])?);
            x.push(parse(&rec[1])?);
        }
        Self::from_samples(&t, &x)
    }
}

/// Format with 12 significant digits, as used for every tabular output.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.11e}");
    let parsed: f64 = s.parse().unwrap_or(v);
    format!("{parsed}")
}

/// A function constant on each grid cell [t_k, t_{k+1}).
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    grid: TimeGrid,
    cells: Vec<f64>,
}

impl StepFunction {
    pub fn new(grid: TimeGrid, cells: Vec<f64>) -> Result<Self> {
        if cells.len() != grid.steps() {
            return Err(Error::Usage(format!(
                "expected {} cell values, got {}",
                grid.steps(),
                cells.len()
            )));
        }
        Ok(Self { grid, cells })
    }

    /// The indicator of [0, t_k].
    pub fn indicator_to(grid: TimeGrid, k: usize) -> Self {
        let cells = (0..grid.steps()).map(|j| if j < k { 1.0 } else { 0.0 }).collect();
        Self { grid, cells }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }
}

/// A grid function whose listed nodes hold half-node values.
///
/// At a flagged endpoint the exact value is singular; the stored value is the
/// one at t = Δ/2 (left end) or T − Δ/2 (right end).
#[derive(Debug, Clone, PartialEq)]
pub struct FlaggedGridFunction {
    pub function: GridFunction,
    pub flagged: Vec<usize>,
}

impl FlaggedGridFunction {
    pub fn unflagged(function: GridFunction) -> Self {
        Self { function, flagged: Vec::new() }
    }

    pub fn values(&self) -> &[f64] {
        self.function.values()
    }

    pub fn grid(&self) -> &TimeGrid {
        self.function.grid()
    }
}
