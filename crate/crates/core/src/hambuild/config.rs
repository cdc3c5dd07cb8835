use crate::error::{Error, Result};
use crate::orbit::PlanarElements;

/// Jupiter/Sun mass ratio (IAU nominal values).
pub const M_JUP_IN_MSUN: f64 = 1.0 / 1047.348644;

/// Heliocentric gravitational constant in AU³/(M☉ yr²), from the Gaussian
/// gravitational constant k = 0.01720209895 AU^{3/2} M☉^{-1/2} day^{-1}.
pub const G_AU_MSUN_YR: f64 = 0.0002959122082855911 * 365.25 * 365.25;

/// Observed parameters of one planet (Table-style inputs: mass in Jupiter
/// masses before the inclination correction, angles in degrees).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanetParams {
    pub mass_jup: f64,
    pub a: f64,
    pub e: f64,
    pub omega_deg: f64,
    pub mean_anom_deg: f64,
}

/// Full system configuration: star, planets, inclination and units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrbitalConfig {
    /// Stellar mass in solar masses.
    pub m0: f64,
    pub planets: [PlanetParams; 2],
    /// Orbital-plane inclination in degrees; detected minimum masses are
    /// divided by sin(i).
    pub inclination_deg: f64,
    /// Gravitational constant in the chosen units.
    pub g_const: f64,
}

impl OrbitalConfig {
    /// The HD60532 system: two giant planets in 3:1 mean-motion resonance.
    pub fn hd60532() -> Self {
        OrbitalConfig {
            m0: 1.44,
            planets: [
                PlanetParams {
                    mass_jup: 3.1548,
                    a: 0.7606,
                    e: 0.278,
                    omega_deg: 352.83,
                    mean_anom_deg: 21.950,
                },
                PlanetParams {
                    mass_jup: 7.4634,
                    a: 1.5854,
                    e: 0.038,
                    omega_deg: 119.49,
                    mean_anom_deg: 197.53,
                },
            ],
            inclination_deg: 20.0,
            g_const: G_AU_MSUN_YR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m0 <= 0.0 || self.g_const <= 0.0 {
            return Err(Error::InvalidConfig("stellar mass and G must be positive".into()));
        }
        let sini = self.inclination_deg.to_radians().sin();
        if sini == 0.0 {
            return Err(Error::InvalidConfig("sin(i) must be nonzero".into()));
        }
        for (j, p) in self.planets.iter().enumerate() {
            if p.mass_jup < 0.0 {
                return Err(Error::InvalidConfig(format!("planet {j}: negative mass")));
            }
            if !(0.0..1.0).contains(&p.e) {
                return Err(Error::InvalidConfig(format!("planet {j}: e outside [0,1)")));
            }
            if p.a <= 0.0 {
                return Err(Error::InvalidConfig(format!("planet {j}: non-positive a")));
            }
        }
        Ok(())
    }

    /// Dynamical planet mass in solar masses (inclination-corrected).
    pub fn planet_mass(&self, j: usize) -> f64 {
        self.planets[j].mass_jup * M_JUP_IN_MSUN / self.inclination_deg.to_radians().sin()
    }

    /// Reduced mass β_j = m₀m_j/(m₀+m_j).
    pub fn beta(&self, j: usize) -> f64 {
        let m = self.planet_mass(j);
        self.m0 * m / (self.m0 + m)
    }

    /// Two-body gravitational parameter μ_j = 𝒢(m₀+m_j).
    pub fn mu_grav(&self, j: usize) -> f64 {
        self.g_const * (self.m0 + self.planet_mass(j))
    }

    /// Perturbation size μ = max_j m_j/m₀.
    pub fn mass_ratio(&self) -> f64 {
        (self.planet_mass(0) / self.m0).max(self.planet_mass(1) / self.m0)
    }

    pub fn initial_elements(&self, j: usize) -> PlanarElements {
        let p = &self.planets[j];
        PlanarElements {
            a: p.a,
            e: p.e,
            omega: p.omega_deg.to_radians(),
            mean_anom: p.mean_anom_deg.to_radians(),
        }
    }

    pub fn poincare_chart(&self) -> PoincareChart {
        let mut lambda_star = [0.0; 2];
        let mut n_star = [0.0; 2];
        let mut a_star = [0.0; 2];
        for j in 0..2 {
            a_star[j] = self.planets[j].a;
            lambda_star[j] = self.beta(j) * (self.mu_grav(j) * a_star[j]).sqrt();
            n_star[j] = (self.mu_grav(j) / a_star[j].powi(3)).sqrt();
        }
        PoincareChart { lambda_star, n_star, a_star }
    }
}

/// Reference values of the Poincaré chart: Λ_j*, n_j* and the semi-axes a_j*
/// they derive from (taken equal to the observed values).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoincareChart {
    pub lambda_star: [f64; 2],
    pub n_star: [f64; 2],
    pub a_star: [f64; 2],
}

/// One planet's phase-space point in Poincaré variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoincarePoint {
    pub l: f64,
    pub lambda: f64,
    pub xi: f64,
    pub eta: f64,
}

impl PoincareChart {
    /// Poincaré variables of an osculating planar orbit.
    pub fn from_elements(&self, cfg: &OrbitalConfig, j: usize, el: &PlanarElements) -> PoincarePoint {
        let big_lambda = cfg.beta(j) * (cfg.mu_grav(j) * el.a).sqrt();
        let amp = (2.0 * big_lambda).sqrt() * (1.0 - (1.0 - el.e * el.e).sqrt()).sqrt();
        PoincarePoint {
            l: big_lambda - self.lambda_star[j],
            lambda: el.lambda(),
            xi: amp * el.omega.cos(),
            eta: -amp * el.omega.sin(),
        }
    }

    /// Osculating elements from Poincaré variables.
    pub fn to_elements(&self, cfg: &OrbitalConfig, j: usize, pt: &PoincarePoint) -> Result<PlanarElements> {
        let big_lambda = pt.l + self.lambda_star[j];
        if big_lambda <= 0.0 {
            return Err(Error::InvalidInput(format!("Λ_{j} = {big_lambda} not positive")));
        }
        let a = (big_lambda / cfg.beta(j)).powi(2) / cfg.mu_grav(j);
        let d = (pt.xi * pt.xi + pt.eta * pt.eta) / (2.0 * big_lambda);
        if d >= 1.0 {
            return Err(Error::InvalidInput(format!("secular amplitude {d} too large")));
        }
        let e = (d * (2.0 - d)).sqrt();
        let omega = (-pt.eta).atan2(pt.xi);
        Ok(PlanarElements { a, e, omega, mean_anom: pt.lambda - omega })
    }
}
