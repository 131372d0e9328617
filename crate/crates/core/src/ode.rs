//! Classical fixed-step fourth-order Runge-Kutta on complex state vectors.

use crate::{Error, Result, C64};

/// Reusable RK4 stage buffers.
pub struct Rk4 {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); dim];
        Rk4 { k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), tmp: z }
    }

    /// Advances `y` from `t` to `t + h` for `dy/dt = f(t, y)`.
    pub fn step<F>(&mut self, f: &mut F, t: f64, h: f64, y: &mut [C64])
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let half = 0.5 * h;
        f(t, y, &mut self.k1);
        for ((tmp, y), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k1) {
            *tmp = y + k * half;
        }
        f(t + half, &self.tmp, &mut self.k2);
        for ((tmp, y), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k2) {
            *tmp = y + k * half;
        }
        f(t + half, &self.tmp, &mut self.k3);
        for ((tmp, y), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k3) {
            *tmp = y + k * h;
        }
        f(t + h, &self.tmp, &mut self.k4);
        let sixth = h / 6.0;
        for (i, y) in y.iter_mut().enumerate() {
            *y += (self.k1[i] + (self.k2[i] + self.k3[i]) * 2.0 + self.k4[i]) * sixth;
        }
    }
}

/// Number of equal substeps needed to cover `interval` with steps no longer
/// than `max_step`.
pub fn substeps(interval: f64, max_step: f64) -> usize {
    if interval <= 0.0 {
        return 0;
    }
    ((interval / max_step) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Checks that `times` is a usable sample grid: nonempty, nonnegative and
/// strictly increasing.
pub fn validate_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::config("time grid is empty"));
    }
    if !(times[0] >= 0.0) {
        return Err(Error::config(format!("time grid must start at t >= 0, got {}", times[0])));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::config("time grid contains non-finite values"));
    }
    if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::config(format!(
            "time grid must be strictly increasing ({} followed by {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

pub(crate) fn validate_step(max_step: f64) -> Result<()> {
    if !(max_step > 0.0 && max_step.is_finite()) {
        return Err(Error::config(format!("step size must be positive and finite, got {max_step}")));
    }
    Ok(())
}

/// Integrates from `y0` at `t = 0` and records the state at every grid time.
pub fn integrate_on_grid<F>(y0: &[C64], times: &[f64], max_step: f64, mut f: F) -> Result<Vec<Vec<C64>>>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    validate_grid(times)?;
    validate_step(max_step)?;
    let mut rk = Rk4::new(y0.len());
    let mut y = y0.to_vec();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let n = substeps(target - t, max_step);
        if n > 0 {
            let h = (target - t) / n as f64;
            for s in 0..n {
                rk.step(&mut f, t + s as f64 * h, h, &mut y);
            }
        }
        t = target;
        out.push(y.clone());
    }
    Ok(out)
}
