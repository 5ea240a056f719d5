use super::graph::{Graph, Var};
use super::AutodiffError;

/// Classical RK4 step recorded on the tape. `f` evaluates the vector field
/// at a state; inputs such as actuations are captured by the closure.
pub fn rk4_step<F>(g: &mut Graph, mut f: F, x: Var, dt: f64) -> Result<Var, AutodiffError>
where
    F: FnMut(&mut Graph, Var) -> Result<Var, AutodiffError>,
{
    if !(dt > 0.0) {
        return Err(AutodiffError::Shape(format!("rk4 step size must be positive, got {dt}")));
    }
    let mut stage = |g: &mut Graph, at: Var, i: usize| -> Result<Var, AutodiffError> {
        let k = f(g, at)?;
        if !g.value(k).is_finite() {
            return Err(AutodiffError::NonFinite(format!("rk4 stage {i}")));
        }
        Ok(k)
    };
    let k1 = stage(g, x, 1)?;
    let x2 = g.add_scaled(x, k1, 0.5 * dt)?;
    let k2 = stage(g, x2, 2)?;
    let x3 = g.add_scaled(x, k2, 0.5 * dt)?;
    let k3 = stage(g, x3, 3)?;
    let x4 = g.add_scaled(x, k3, dt)?;
    let k4 = stage(g, x4, 4)?;
    let s = g.add_scaled(k1, k2, 2.0)?;
    let s = g.add_scaled(s, k3, 2.0)?;
    let s = g.add(s, k4)?;
    g.add_scaled(x, s, dt / 6.0)
}
