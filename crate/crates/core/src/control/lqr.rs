use super::closed_loop::Policy;
use super::ControlError;
use crate::linalg::{eig, lqr_gain, solve_dare, DenseMatrix};
use crate::linear_rom::LinearROM;

/// `u = −K E x` with `K` from the DARE on `(A_R, B_R, qI, rI)`.
#[derive(Clone, Debug)]
pub struct LqrController {
    pub gain: DenseMatrix,
    pub rom: LinearROM,
    pub q_weight: f64,
    pub r_weight: f64,
}

pub fn lqr_fit(rom: &LinearROM, q_weight: f64, r_weight: f64) -> Result<LqrController, ControlError> {
    if !(q_weight > 0.0 && r_weight > 0.0) {
        return Err(ControlError::Argument(format!("LQR weights must be positive, got q = {q_weight}, r = {r_weight}")));
    }
    let q = DenseMatrix::identity(rom.r_x()).scale(q_weight);
    let r = DenseMatrix::identity(rom.d_u()).scale(r_weight);
    let p = solve_dare(&rom.a_r, &rom.b_r, &q, &r)?;
    let gain = lqr_gain(&rom.a_r, &rom.b_r, &r, &p)?;
    let closed = &rom.a_r - &rom.b_r.matmul(&gain);
    let radius = eig(&closed)?.spectral_radius();
    if !(radius < 1.0) {
        return Err(ControlError::Unstable { radius });
    }
    Ok(LqrController { gain, rom: rom.clone(), q_weight, r_weight })
}

impl LqrController {
    pub fn closed_loop_matrix(&self) -> DenseMatrix {
        &self.rom.a_r - &self.rom.b_r.matmul(&self.gain)
    }
}

impl Policy for LqrController {
    fn name(&self) -> &str {
        "lqr"
    }

    fn act(&self, x: &[f64]) -> Result<Vec<f64>, ControlError> {
        if x.len() != self.rom.d_x() {
            return Err(ControlError::Shape(format!("state of length {} for d_x = {}", x.len(), self.rom.d_x())));
        }
        Ok(self.gain.matvec(&self.rom.encode(x)).into_iter().map(|v| -v).collect())
    }
}
