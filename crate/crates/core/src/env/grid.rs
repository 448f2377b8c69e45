use serde::{Deserialize, Serialize};

use super::quadrature::gauss_legendre5;
use crate::error::{invalid, Result};

/// Closed time interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub start: f64,
    pub end: f64,
}

impl Horizon {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || end <= start {
            return Err(invalid(format!("horizon [{start}, {end}] is empty or not finite")));
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }

    pub fn union(&self, other: &Horizon) -> Horizon {
        Horizon { start: self.start.min(other.start), end: self.end.max(other.end) }
    }
}

/// Scalar path tabulated on a uniform time grid; evaluation between nodes
/// uses four-point (cubic) Lagrange interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPath {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl GridPath {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Self {
        assert!(dt > 0.0 && values.len() >= 4, "grid path needs dt > 0 and 4 nodes");
        Self { t0, dt, values }
    }

    /// Tabulates `f` on `[h.start, h.end]` with step at most `dt`.
    pub fn sample(f: impl Fn(f64) -> f64, h: Horizon, dt: f64) -> Self {
        let n = ((h.len() / dt).ceil() as usize).max(3);
        let step = h.len() / n as f64;
        let values = (0..=n).map(|k| f(h.start + k as f64 * step)).collect();
        Self::new(h.start, step, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.values.len() - 1)
    }

    pub fn horizon(&self) -> Horizon {
        Horizon { start: self.t0, end: self.t_end() }
    }

    /// Cubic interpolation; clamps to the end nodes outside the grid.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.values.len();
        let s = (t - self.t0) / self.dt;
        if s <= 0.0 {
            return self.values[0];
        }
        if s >= (n - 1) as f64 {
            return self.values[n - 1];
        }
        let k = s.floor() as usize;
        let frac = s - k as f64;
        if frac == 0.0 {
            return self.values[k];
        }
        // stencil k-1..k+2, shifted inward at the ends
        let base = k.saturating_sub(1).min(n - 4);
        let x = s - base as f64;
        let y = &self.values[base..base + 4];
        let l0 = -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0;
        let l1 = x * (x - 2.0) * (x - 3.0) / 2.0;
        let l2 = -x * (x - 1.0) * (x - 3.0) / 2.0;
        let l3 = x * (x - 1.0) * (x - 2.0) / 6.0;
        l0 * y[0] + l1 * y[1] + l2 * y[2] + l3 * y[3]
    }

    /// Fourth-order central difference at node `k` (one-sided near ends).
    pub fn derivative_at_node(&self, k: usize) -> f64 {
        let y = &self.values;
        let n = y.len();
        let h = self.dt;
        if k >= 2 && k + 2 < n {
            (y[k - 2] - 8.0 * y[k - 1] + 8.0 * y[k + 1] - y[k + 2]) / (12.0 * h)
        } else if k + 4 < n {
            (-25.0 * y[k] + 48.0 * y[k + 1] - 36.0 * y[k + 2] + 16.0 * y[k + 3] - 3.0 * y[k + 4])
                / (12.0 * h)
        } else {
            (25.0 * y[k] - 48.0 * y[k - 1] + 36.0 * y[k - 2] - 16.0 * y[k - 3] + 3.0 * y[k - 4])
                / (12.0 * h)
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A path tabulated together with its running integral from the first node.
/// Window averages over grid-aligned windows are then O(1).
#[derive(Debug, Clone)]
pub struct PrefixTable {
    pub samples: GridPath,
    pub prefix: GridPath,
}

impl PrefixTable {
    /// Builds the table; cell integrals use five-point Gauss-Legendre on the
    /// exact path, so the prefix is accurate to roughly `dt^10`.
    pub fn build(f: impl Fn(f64) -> f64, h: Horizon, dt: f64) -> Self {
        let samples = GridPath::sample(&f, h, dt);
        let mut prefix = Vec::with_capacity(samples.len());
        // Neumaier-compensated running sum: long horizons add up 10^5+ cells
        let (mut acc, mut carry) = (0.0f64, 0.0f64);
        prefix.push(0.0);
        for k in 1..samples.len() {
            let cell = gauss_legendre5(&f, samples.time(k - 1), samples.time(k));
            let next = acc + cell;
            carry +=
                if acc.abs() >= cell.abs() { (acc - next) + cell } else { (cell - next) + acc };
            acc = next;
            prefix.push(acc + carry);
        }
        let prefix = GridPath::new(samples.t0, samples.dt, prefix);
        Self { samples, prefix }
    }

    /// `∫_s^t path` for `s, t` inside the table (cubic interpolation of the
    /// prefix between nodes).
    pub fn integral(&self, s: f64, t: f64) -> f64 {
        self.prefix.eval(t) - self.prefix.eval(s)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.samples.eval(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_interpolation_reproduces_cubics() {
        let f = |t: f64| 2.0 * t * t * t - t + 0.5;
        let g = GridPath::sample(f, Horizon::new(-1.0, 2.0).unwrap(), 0.1);
        for k in 0..300 {
            let t = -1.0 + 3.0 * k as f64 / 299.0;
            assert!((g.eval(t) - f(t)).abs() < 1e-11, "t = {t}");
        }
    }

    #[test]
    fn derivative_is_fourth_order() {
        let g = GridPath::sample(f64::sin, Horizon::new(0.0, 3.0).unwrap(), 0.01);
        for k in [0, 1, 50, 150, g.len() - 2, g.len() - 1] {
            assert!((g.derivative_at_node(k) - g.time(k).cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn prefix_integral_of_sine() {
        let tab = PrefixTable::build(f64::sin, Horizon::new(0.0, 10.0).unwrap(), 0.01);
        let exact = |s: f64, t: f64| s.cos() - t.cos();
        assert!((tab.integral(0.0, 10.0) - exact(0.0, 10.0)).abs() < 1e-12);
        assert!((tab.integral(1.234, 7.891) - exact(1.234, 7.891)).abs() < 1e-9);
    }
}
