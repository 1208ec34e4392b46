use crate::error::{Error, Result};

/// Viscosity, spectral-gap radius and energy budget.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhysicalParams {
    pub nu: f64,
    /// Gap radius in continuous wavenumber units (`|k| / period`).
    pub rho0: f64,
    /// Energy budget `M` bounding `|U^i|_2`.
    pub m_energy: f64,
}

impl PhysicalParams {
    pub fn new(nu: f64, rho0: f64, m_energy: f64) -> Result<Self> {
        let p = PhysicalParams { nu, rho0, m_energy };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("physics.nu", self.nu), ("physics.rho0", self.rho0), ("physics.m_energy", self.m_energy)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: alloc::format!("must be strictly positive (got {v})"),
                });
            }
        }
        Ok(())
    }
}
