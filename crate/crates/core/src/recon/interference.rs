//! Signal-plus-interference scenes and the MMSE of the signal component.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::geometry::{ArrayGeometry, SPEED_OF_LIGHT};
use crate::linalg::symmetric_eigen;
use crate::recon::mmse::{gain_and_mse, Mse};
use crate::signal::SourceSpec;
use crate::slepian::{covariance, covariance_matrix, CovarianceModel};
use crate::{Result, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneModel {
    pub signal: SourceSpec,
    #[serde(default)]
    pub interferers: Vec<SourceSpec>,
    #[serde(default)]
    pub noise_var: f64,
}

#[derive(Clone, Debug)]
pub struct CompositeCovariance {
    pub r0: CovarianceModel,
    /// Sum of the interferer covariances (zero without interferers).
    pub ri: DMatrix<C64>,
}

impl CompositeCovariance {
    pub fn total(&self) -> DMatrix<C64> {
        self.r0.matrix() + &self.ri
    }
}

pub fn composite_covariance(scene: &SceneModel, g: &ArrayGeometry) -> Result<CompositeCovariance> {
    let r0 = covariance(g, &scene.signal)?;
    let m = g.len();
    let mut ri = DMatrix::zeros(m, m);
    for src in &scene.interferers {
        ri += covariance_matrix(g, src)?;
    }
    Ok(CompositeCovariance { r0, ri })
}

/// `y0_hat = R0 Phi^H (Phi (R0 + RI) Phi^H + sigma2 I)^{-1} w`.
pub fn mmse_interference_estimate(
    phi: &DMatrix<C64>,
    r0: &DMatrix<C64>,
    ri: &DMatrix<C64>,
    sigma2: f64,
    w: &DVector<C64>,
) -> Result<DVector<C64>> {
    let rec = crate::recon::MmseReconstructor::with_interference(phi, r0, ri, sigma2)?;
    rec.estimate(w)
}

/// `trace(R0 - R0 Phi^H (Phi (R0 + RI) Phi^H + sigma2 I)^{-1} Phi R0)`.
pub fn mse_with_interference(phi: &DMatrix<C64>, r0: &DMatrix<C64>, ri: &DMatrix<C64>, sigma2: f64) -> Result<Mse> {
    let total = r0 + ri;
    Ok(gain_and_mse(phi, r0, &total, sigma2)?.1)
}

/// Dominant direction of the element positions (unit vector).
pub fn principal_axis(g: &ArrayGeometry) -> [f64; 3] {
    let c = g.centroid();
    let mut cov = DMatrix::<f64>::zeros(3, 3);
    for p in &g.elements {
        let d = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
        for i in 0..3 {
            for j in 0..3 {
                cov[(i, j)] += d[i] * d[j];
            }
        }
    }
    let (_, v) = symmetric_eigen(&cov);
    [v[(0, 0)], v[(1, 0)], v[(2, 0)]]
}

/// Spectral separation of two sources along the array's principal axis:
/// `|f_a - f_b| >= W_a + W_b` with spatial center frequency
/// `f = f_c (u . a) / c` and half width `W = Omega |u . a| / c`.
pub fn separated(g: &ArrayGeometry, a: &SourceSpec, b: &SourceSpec) -> bool {
    let axis = principal_axis(g);
    let proj = |s: &SourceSpec| {
        let u = s.doa.unit_normal();
        u[0] * axis[0] + u[1] * axis[1] + u[2] * axis[2]
    };
    let (pa, pb) = (proj(a), proj(b));
    let fa = a.carrier_hz * pa / SPEED_OF_LIGHT;
    let fb = b.carrier_hz * pb / SPEED_OF_LIGHT;
    let wa = a.half_bandwidth_hz * pa.abs() / SPEED_OF_LIGHT;
    let wb = b.half_bandwidth_hz * pb.abs() / SPEED_OF_LIGHT;
    (fa - fb).abs() >= wa + wb
}
