//! Analytic initial-density profiles and the validated initial datum.
//!
//! Every built-in profile factorizes as `f0(x, v) = M * s(x) * g(v)` with a
//! normalized spatial law `s` and a drifting Maxwellian `g`. Each profile also
//! knows a measure-preserving map from the unit cube onto its own law, which
//! is what the phase-space sampler pushes low-discrepancy points through.

use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::Arc;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::params::{self, ParamMap, ParamReader, ParamValue};
use crate::quadrature;
use crate::registry::Registry;

/// A phase-space point produced by a profile's transport map, with the
/// density of the map's image law at that point.
#[derive(Debug, Clone, Copy)]
pub struct PhasePoint {
    pub x: Vec3,
    pub v: Vec3,
    pub proposal: f64,
}

pub trait DensityProfile: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn params(&self) -> ParamMap;
    fn value(&self, x: &Vec3, v: &Vec3) -> f64;
    /// Total mass `M = ∬ f0`.
    fn mass(&self) -> f64;
    /// `‖f0‖_∞`.
    fn sup(&self) -> f64;
    fn transport(&self, u: &[f64; 6]) -> PhasePoint;
    /// Exponent `a` with `f0 ~ |x - p|^a` near `p`; `INFINITY` when `f0`
    /// vanishes on a neighbourhood of `p`.
    fn local_exponent(&self, p: &Vec3) -> f64;
    /// Total energy of the datum together with a point charge at `(xi, eta)`.
    /// Exact quadrature for radial spatial laws, an upper bound otherwise.
    fn energy(&self, xi: &Vec3, eta: &Vec3) -> f64;
    /// `∬ |v|^m f0`.
    fn velocity_moment(&self, m: f64) -> f64;
}

// ---------------------------------------------------------------------------
// velocity law

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maxwellian {
    pub drift: Vec3,
    pub thermal: f64,
}

impl Maxwellian {
    fn pdf(&self, v: &Vec3) -> f64 {
        let s2 = self.thermal * self.thermal;
        let d = geom::sub(v, &self.drift);
        (-geom::norm2(&d) / (2.0 * s2)).exp() / (2.0 * PI * s2).powf(1.5)
    }

    fn peak(&self) -> f64 {
        (2.0 * PI * self.thermal * self.thermal).powf(-1.5)
    }

    fn sample(&self, u: &[f64]) -> Vec3 {
        let n = Normal::standard();
        std::array::from_fn(|k| self.drift[k] + self.thermal * n.inverse_cdf(u[k]))
    }

    /// `E|v|^m` by radial quadrature in the speed (drift-free case is exact
    /// up to quadrature error; a drift is handled by angular averaging).
    fn moment(&self, m: f64) -> f64 {
        let s = self.thermal;
        let u = geom::norm(&self.drift);
        // density of w = v - drift is isotropic; |v|^m averaged over angle
        let radial = |w: f64| {
            let ang = if u == 0.0 {
                w.powf(m)
            } else {
                quadrature::gauss_legendre(
                    |c| 0.5 * (w * w + u * u + 2.0 * w * u * c).max(0.0).powf(m / 2.0),
                    -1.0,
                    1.0,
                    8,
                )
            };
            4.0 * PI * w * w * (-w * w / (2.0 * s * s)).exp() / (2.0 * PI * s * s).powf(1.5) * ang
        };
        quadrature::gauss_legendre(radial, 0.0, 40.0 * s, 400)
    }

    fn params(&self, map: &mut ParamMap) {
        map.insert("thermal".into(), params::num(self.thermal));
        map.insert("drift".into(), params::vec3(self.drift));
    }
}

fn read_maxwellian(r: &mut ParamReader) -> Result<Maxwellian> {
    let thermal = r.number("thermal", 1.0)?;
    let drift = r.vec3("drift", geom::ZERO)?;
    if thermal <= 0.0 {
        return Err(Error::validation("profile.thermal", "must be positive"));
    }
    Ok(Maxwellian { drift, thermal })
}

// ---------------------------------------------------------------------------
// spatial laws

/// Normalized spatial probability law with a cube-to-law transport.
pub trait SpatialLaw: Send + Sync + fmt::Debug {
    fn pdf(&self, x: &Vec3) -> f64;
    fn sup(&self) -> f64;
    fn sample(&self, u: &[f64]) -> Vec3;
    fn local_exponent(&self, p: &Vec3) -> f64;
    fn radial(&self) -> Option<&dyn RadialLaw>;
    fn params(&self, map: &mut ParamMap);
}

/// Spherically symmetric spatial law about `center`.
pub trait RadialLaw: Send + Sync + fmt::Debug {
    fn center(&self) -> Vec3;
    /// Density per unit volume at radius `r`.
    fn density(&self, r: f64) -> f64;
    /// Probability of the ball of radius `r`.
    fn cdf(&self, r: f64) -> f64;
    /// Radii where the density has kinks, ascending; the last one ends the
    /// graded region used by quadratures.
    fn breakpoints(&self) -> Vec<f64>;
    /// Radius beyond which the density vanishes, if any.
    fn support(&self) -> Option<f64>;
}

fn unit_direction(u1: f64, u2: f64) -> Vec3 {
    let z = 2.0 * u1 - 1.0;
    let rho = (1.0 - z * z).max(0.0).sqrt();
    let phi = 2.0 * PI * u2;
    [rho * phi.cos(), rho * phi.sin(), z]
}

/// Invert a nondecreasing cdf by bisection on `[0, hi]`.
fn invert_cdf(cdf: impl Fn(f64) -> f64, target: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn sample_radial(law: &dyn RadialLaw, u: &[f64], r_hi: f64) -> Vec3 {
    let r = invert_cdf(|r| law.cdf(r), u[0], r_hi);
    geom::add(&law.center(), &geom::scale(&unit_direction(u[1], u[2]), r))
}

fn radial_local_exponent(law: &dyn RadialLaw, p: &Vec3, at_center: f64) -> f64 {
    let d = geom::dist(p, &law.center());
    if d < 1e-12 {
        return at_center;
    }
    if law.support().is_some_and(|s| d > s) {
        f64::INFINITY
    } else if law.density(d) > 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Lower incomplete gamma `γ(a, x)` by its power series; intended for `x ≤ a + 1`.
fn lower_gamma_series(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut term = 1.0 / a;
    let mut sum = term;
    for k in 1..200 {
        term *= x / (a + k as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum * (a * x.ln() - x).exp()
}

/// Spatial law `∝ min(r/L, 1)^α exp(-r/L)` about a center.
#[derive(Debug, Clone)]
pub struct PowerExponential {
    pub center: Vec3,
    pub alpha: f64,
    pub length: f64,
    norm: f64,
}

impl PowerExponential {
    pub fn new(center: Vec3, alpha: f64, length: f64) -> Result<Self> {
        if alpha <= -3.0 {
            return Err(Error::NotNormalizable {
                profile: "radial-maxwellian".into(),
                reason: format!("alpha = {alpha} makes the density non-integrable at the center"),
            });
        }
        if length <= 0.0 {
            return Err(Error::validation("profile.length", "must be positive"));
        }
        let mut law = Self {
            center,
            alpha,
            length,
            norm: 1.0,
        };
        law.norm = law.mass_to(f64::INFINITY);
        Ok(law)
    }

    /// Unnormalized `∫_0^t min(s,1)^α e^{-s} s^2 ds` in scaled radius `t = r/L`.
    fn mass_to(&self, t: f64) -> f64 {
        let inner = lower_gamma_series(3.0 + self.alpha, t.min(1.0));
        if t <= 1.0 {
            inner
        } else {
            let outer = 5.0 / E - if t.is_finite() { (-t).exp() * (t * t + 2.0 * t + 2.0) } else { 0.0 };
            inner + outer
        }
    }
}

impl RadialLaw for PowerExponential {
    fn center(&self) -> Vec3 {
        self.center
    }
    fn density(&self, r: f64) -> f64 {
        let t = r / self.length;
        t.min(1.0).powf(self.alpha) * (-t).exp()
            / (4.0 * PI * self.length.powi(3) * self.norm)
    }
    fn cdf(&self, r: f64) -> f64 {
        (self.mass_to(r / self.length) / self.norm).min(1.0)
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![self.length]
    }
    fn support(&self) -> Option<f64> {
        None
    }
}

impl SpatialLaw for PowerExponential {
    fn pdf(&self, x: &Vec3) -> f64 {
        self.density(geom::dist(x, &self.center))
    }
    fn sup(&self) -> f64 {
        if self.alpha < 0.0 {
            f64::INFINITY
        } else if self.alpha <= 1.0 {
            // t^α e^{-t} on [0, 1] peaks at t = α
            let t = self.alpha.max(0.0);
            let peak = if t == 0.0 { 1.0 } else { t.powf(self.alpha) * (-t).exp() };
            peak / (4.0 * PI * self.length.powi(3) * self.norm)
        } else {
            (-1.0f64).exp() / (4.0 * PI * self.length.powi(3) * self.norm)
        }
    }
    fn sample(&self, u: &[f64]) -> Vec3 {
        sample_radial(self, u, 80.0 * self.length)
    }
    fn local_exponent(&self, p: &Vec3) -> f64 {
        radial_local_exponent(self, p, self.alpha)
    }
    fn radial(&self) -> Option<&dyn RadialLaw> {
        Some(self)
    }
    fn params(&self, map: &mut ParamMap) {
        map.insert("center".into(), params::vec3(self.center));
        map.insert("alpha".into(), params::num(self.alpha));
        map.insert("length".into(), params::num(self.length));
    }
}

#[derive(Debug, Clone)]
pub struct UniformBall {
    pub center: Vec3,
    pub radius: f64,
}

impl RadialLaw for UniformBall {
    fn center(&self) -> Vec3 {
        self.center
    }
    fn density(&self, r: f64) -> f64 {
        if r < self.radius {
            3.0 / (4.0 * PI * self.radius.powi(3))
        } else {
            0.0
        }
    }
    fn cdf(&self, r: f64) -> f64 {
        (r / self.radius).min(1.0).powi(3)
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![self.radius]
    }
    fn support(&self) -> Option<f64> {
        Some(self.radius)
    }
}

impl SpatialLaw for UniformBall {
    fn pdf(&self, x: &Vec3) -> f64 {
        self.density(geom::dist(x, &self.center))
    }
    fn sup(&self) -> f64 {
        self.density(0.0)
    }
    fn sample(&self, u: &[f64]) -> Vec3 {
        let r = self.radius * u[0].cbrt();
        geom::add(&self.center, &geom::scale(&unit_direction(u[1], u[2]), r))
    }
    fn local_exponent(&self, p: &Vec3) -> f64 {
        radial_local_exponent(self, p, 0.0)
    }
    fn radial(&self) -> Option<&dyn RadialLaw> {
        Some(self)
    }
    fn params(&self, map: &mut ParamMap) {
        map.insert("center".into(), params::vec3(self.center));
        map.insert("radius".into(), params::num(self.radius));
    }
}

#[derive(Debug, Clone)]
pub struct UniformBox {
    pub lo: Vec3,
    pub hi: Vec3,
}

impl UniformBox {
    fn volume(&self) -> f64 {
        (0..3).map(|k| self.hi[k] - self.lo[k]).product()
    }
}

impl SpatialLaw for UniformBox {
    fn pdf(&self, x: &Vec3) -> f64 {
        if (0..3).all(|k| x[k] >= self.lo[k] && x[k] < self.hi[k]) {
            1.0 / self.volume()
        } else {
            0.0
        }
    }
    fn sup(&self) -> f64 {
        1.0 / self.volume()
    }
    fn sample(&self, u: &[f64]) -> Vec3 {
        std::array::from_fn(|k| self.lo[k] + u[k] * (self.hi[k] - self.lo[k]))
    }
    fn local_exponent(&self, p: &Vec3) -> f64 {
        if (0..3).all(|k| p[k] >= self.lo[k] && p[k] <= self.hi[k]) {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn radial(&self) -> Option<&dyn RadialLaw> {
        None
    }
    fn params(&self, map: &mut ParamMap) {
        map.insert("lo".into(), params::vec3(self.lo));
        map.insert("hi".into(), params::vec3(self.hi));
    }
}

/// Piecewise-linear radial density given at tabulated radii.
#[derive(Debug, Clone)]
pub struct TabulatedRadial {
    pub center: Vec3,
    radii: Vec<f64>,
    values: Vec<f64>,
    /// Unnormalized mass inside each tabulated radius.
    cumulative: Vec<f64>,
}

impl TabulatedRadial {
    pub fn new(center: Vec3, radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() < 2 || radii.len() != values.len() {
            return Err(Error::validation(
                "profile.radii",
                "need at least two radii and one value per radius",
            ));
        }
        if radii[0] != 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation(
                "profile.radii",
                "must start at 0 and increase strictly",
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::validation("profile.values", "must be finite and >= 0"));
        }
        let mut cumulative = vec![0.0];
        for k in 0..radii.len() - 1 {
            let m = Self::segment_mass(radii[k], radii[k + 1], values[k], values[k + 1], radii[k + 1]);
            cumulative.push(cumulative[k] + m);
        }
        if *cumulative.last().unwrap() <= 0.0 {
            return Err(Error::NotNormalizable {
                profile: "tabulated".into(),
                reason: "all tabulated values vanish".into(),
            });
        }
        Ok(Self {
            center,
            radii,
            values,
            cumulative,
        })
    }

    /// `4π ∫_{r0}^{r} ρ(s) s^2 ds` for linear ρ between `(r0, a)` and `(r1, b)`.
    fn segment_mass(r0: f64, r1: f64, a: f64, b: f64, r: f64) -> f64 {
        let slope = (b - a) / (r1 - r0);
        let c0 = a - slope * r0;
        let prim = |s: f64| c0 * s.powi(3) / 3.0 + slope * s.powi(4) / 4.0;
        4.0 * PI * (prim(r) - prim(r0))
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn raw_density(&self, r: f64) -> f64 {
        let last = *self.radii.last().unwrap();
        if r >= last {
            return 0.0;
        }
        let k = self.radii.partition_point(|&x| x <= r) - 1;
        let t = (r - self.radii[k]) / (self.radii[k + 1] - self.radii[k]);
        self.values[k] * (1.0 - t) + self.values[k + 1] * t
    }
}

impl RadialLaw for TabulatedRadial {
    fn center(&self) -> Vec3 {
        self.center
    }
    fn density(&self, r: f64) -> f64 {
        self.raw_density(r) / self.total()
    }
    fn cdf(&self, r: f64) -> f64 {
        let last = *self.radii.last().unwrap();
        if r >= last {
            return 1.0;
        }
        let k = self.radii.partition_point(|&x| x <= r) - 1;
        let m = self.cumulative[k]
            + Self::segment_mass(
                self.radii[k],
                self.radii[k + 1],
                self.values[k],
                self.values[k + 1],
                r,
            );
        m / self.total()
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.radii[1..].to_vec()
    }
    fn support(&self) -> Option<f64> {
        self.radii.last().copied()
    }
}

impl SpatialLaw for TabulatedRadial {
    fn pdf(&self, x: &Vec3) -> f64 {
        self.density(geom::dist(x, &self.center))
    }
    fn sup(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max) / self.total()
    }
    fn sample(&self, u: &[f64]) -> Vec3 {
        sample_radial(self, u, *self.radii.last().unwrap())
    }
    fn local_exponent(&self, p: &Vec3) -> f64 {
        let at_center = if self.values[0] > 0.0 {
            0.0
        } else if self.values[1] > 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
        radial_local_exponent(self, p, at_center)
    }
    fn radial(&self) -> Option<&dyn RadialLaw> {
        Some(self)
    }
    fn params(&self, map: &mut ParamMap) {
        map.insert("center".into(), params::vec3(self.center));
        map.insert("radii".into(), ParamValue::Vector(self.radii.clone()));
        map.insert("values".into(), ParamValue::Vector(self.values.clone()));
    }
}

// ---------------------------------------------------------------------------
// factorized profile

#[derive(Debug)]
pub struct Factorized<S: SpatialLaw> {
    name: &'static str,
    mass: f64,
    spatial: S,
    velocity: Maxwellian,
}

impl<S: SpatialLaw> Factorized<S> {
    pub fn new(name: &'static str, mass: f64, spatial: S, velocity: Maxwellian) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::NotNormalizable {
                profile: name.into(),
                reason: format!("mass {mass} must be finite and positive"),
            });
        }
        Ok(Self {
            name,
            mass,
            spatial,
            velocity,
        })
    }

    pub fn spatial(&self) -> &S {
        &self.spatial
    }
}

/// Coulomb energy terms of a radial spatial density of total mass `mass`:
/// returns (self-energy, potential at `point`).
pub fn radial_coulomb_terms(law: &dyn RadialLaw, mass: f64, point: &Vec3) -> (f64, f64) {
    let rho = |r: f64| mass * law.density(r);
    let enclosed = |r: f64| mass * law.cdf(r);
    let integrate = |f: &dyn Fn(f64) -> f64, from: f64| -> f64 {
        let mut bps: Vec<f64> = law.breakpoints().into_iter().filter(|&b| b > from).collect();
        bps.insert(0, from);
        let mut total = 0.0;
        for w in bps.windows(2) {
            total += quadrature::graded(f, w[0], w[1], 30, 8);
        }
        let last = *bps.last().unwrap();
        match law.support() {
            Some(s) if s <= last => total,
            Some(s) => total + quadrature::gauss_legendre(f, last, s, 64),
            None => total + quadrature::half_line(f, last, 20.0 * last.max(1.0)),
        }
    };
    let self_energy = integrate(&|r: f64| 4.0 * PI * enclosed(r) * rho(r) * r, 0.0);
    let d = geom::dist(point, &law.center());
    let outer = integrate(&|s: f64| 4.0 * PI * rho(s) * s, d);
    let potential = if d > 0.0 { enclosed(d) / d + outer } else { outer };
    (self_energy, potential)
}

impl<S: SpatialLaw> DensityProfile for Factorized<S> {
    fn name(&self) -> &'static str {
        self.name
    }
    fn params(&self) -> ParamMap {
        let mut map = ParamMap::new();
        map.insert("mass".into(), params::num(self.mass));
        self.spatial.params(&mut map);
        self.velocity.params(&mut map);
        map
    }
    fn value(&self, x: &Vec3, v: &Vec3) -> f64 {
        self.mass * self.spatial.pdf(x) * self.velocity.pdf(v)
    }
    fn mass(&self) -> f64 {
        self.mass
    }
    fn sup(&self) -> f64 {
        self.mass * self.spatial.sup() * self.velocity.peak()
    }
    fn transport(&self, u: &[f64; 6]) -> PhasePoint {
        let x = self.spatial.sample(&u[0..3]);
        let v = self.velocity.sample(&u[3..6]);
        PhasePoint {
            x,
            v,
            proposal: self.spatial.pdf(&x) * self.velocity.pdf(&v),
        }
    }
    fn local_exponent(&self, p: &Vec3) -> f64 {
        self.spatial.local_exponent(p)
    }
    fn energy(&self, xi: &Vec3, eta: &Vec3) -> f64 {
        let kinetic = 0.5 * self.mass * self.velocity.moment(2.0);
        let charge = 0.5 * geom::norm2(eta);
        let (self_energy, potential) = match self.spatial.radial() {
            Some(law) => radial_coulomb_terms(law, self.mass, xi),
            None => {
                // the potential of a density bounded by ρ_max with mass M is at
                // most that of the uniform ball of density ρ_max at its center
                let rho_max = self.mass * self.spatial.sup();
                let radius = (3.0 * self.mass / (4.0 * PI * rho_max)).cbrt();
                let phi_max = 1.5 * self.mass / radius;
                (0.5 * self.mass * phi_max, phi_max)
            }
        };
        kinetic + charge + self_energy + potential
    }
    fn velocity_moment(&self, m: f64) -> f64 {
        self.mass * self.velocity.moment(m)
    }
}

// ---------------------------------------------------------------------------
// registry

pub const DEFAULT_PROFILE: &str = "radial-maxwellian";

pub fn registry() -> Registry<dyn DensityProfile> {
    let mut reg: Registry<dyn DensityProfile> = Registry::new("density profile");
    reg.register(DEFAULT_PROFILE, build_radial_maxwellian);
    reg.register("default", build_radial_maxwellian);
    reg.register("uniform-ball", |p| {
        let mut r = ParamReader::new("profile", p);
        let mass = r.number("mass", 0.9)?;
        let center = r.vec3("center", geom::ZERO)?;
        let radius = r.number("radius", 1.0)?;
        let vel = read_maxwellian(&mut r)?;
        r.finish()?;
        if radius <= 0.0 {
            return Err(Error::validation("profile.radius", "must be positive"));
        }
        Ok(Box::new(Factorized::new("uniform-ball", mass, UniformBall { center, radius }, vel)?))
    });
    reg.register("uniform-box", |p| {
        let mut r = ParamReader::new("profile", p);
        let mass = r.number("mass", 0.9)?;
        let lo = r.vec3("lo", [-1.0; 3])?;
        let hi = r.vec3("hi", [1.0; 3])?;
        let vel = read_maxwellian(&mut r)?;
        r.finish()?;
        if (0..3).any(|k| hi[k] <= lo[k]) {
            return Err(Error::validation("profile.hi", "must exceed `lo` componentwise"));
        }
        Ok(Box::new(Factorized::new("uniform-box", mass, UniformBox { lo, hi }, vel)?))
    });
    reg.register("tabulated", |p| {
        let mut r = ParamReader::new("profile", p);
        let mass = r.number("mass", 0.9)?;
        let center = r.vec3("center", geom::ZERO)?;
        let radii = r
            .vector("radii")?
            .ok_or_else(|| Error::validation("profile.radii", "required"))?;
        let values = r
            .vector("values")?
            .ok_or_else(|| Error::validation("profile.values", "required"))?;
        let vel = read_maxwellian(&mut r)?;
        r.finish()?;
        let law = TabulatedRadial::new(center, radii, values)?;
        Ok(Box::new(Factorized::new("tabulated", mass, law, vel)?))
    });
    reg
}

fn build_radial_maxwellian(p: &ParamMap) -> Result<Box<dyn DensityProfile>> {
    let mut r = ParamReader::new("profile", p);
    let mass = r.number("mass", 0.9)?;
    let center = r.vec3("center", geom::ZERO)?;
    let alpha = r.number("alpha", 0.6)?;
    let length = r.number("length", 1.0)?;
    let vel = read_maxwellian(&mut r)?;
    r.finish()?;
    let law = PowerExponential::new(center, alpha, length)?;
    Ok(Box::new(Factorized::new(DEFAULT_PROFILE, mass, law, vel)?))
}

pub fn build_profile(name: &str, params: &ParamMap) -> Result<Arc<dyn DensityProfile>> {
    Ok(Arc::from(registry().build(name, params)?))
}

// ---------------------------------------------------------------------------
// validated initial datum

/// Initial plasma density together with the point charge's initial state,
/// checked against the hypotheses of the existence theory.
#[derive(Debug, Clone)]
pub struct InitialDensity {
    profile: Arc<dyn DensityProfile>,
    pub charge_center: Vec3,
    pub charge_velocity: Vec3,
    /// Exponent of `f0 ~ |x - ξ0|^α` near the charge.
    pub near_charge_exponent: f64,
    pub total_mass: f64,
    /// Moments `H_m(0)` are finite for every `m` below this order.
    pub moment_order: f64,
    pub initial_energy: f64,
}

pub struct InitialDensityBuilder {
    profile: Arc<dyn DensityProfile>,
    charge_center: Vec3,
    charge_velocity: Vec3,
    moment_order: f64,
}

pub const DEFAULT_MOMENT_ORDER: f64 = 6.5;
pub const DEFAULT_CHARGE_VELOCITY: Vec3 = [0.5, 0.0, 0.0];

impl InitialDensity {
    pub fn builder(profile: Arc<dyn DensityProfile>) -> InitialDensityBuilder {
        InitialDensityBuilder {
            profile,
            charge_center: geom::ZERO,
            charge_velocity: DEFAULT_CHARGE_VELOCITY,
            moment_order: DEFAULT_MOMENT_ORDER,
        }
    }

    /// The built-in datum: `radial-maxwellian` with `M0 = 0.9`, `α = 0.6`,
    /// charge at the origin moving with velocity `(0.5, 0, 0)`.
    pub fn standard() -> Self {
        let profile = build_profile(DEFAULT_PROFILE, &ParamMap::new()).expect("default profile");
        Self::builder(profile).build().expect("default datum satisfies the hypotheses")
    }

    pub fn profile(&self) -> &dyn DensityProfile {
        self.profile.as_ref()
    }

    pub fn profile_arc(&self) -> Arc<dyn DensityProfile> {
        self.profile.clone()
    }

    pub fn value(&self, x: &Vec3, v: &Vec3) -> f64 {
        self.profile.value(x, v)
    }
}

impl InitialDensityBuilder {
    pub fn charge(mut self, center: Vec3, velocity: Vec3) -> Self {
        self.charge_center = center;
        self.charge_velocity = velocity;
        self
    }

    pub fn moment_order(mut self, m0: f64) -> Self {
        self.moment_order = m0;
        self
    }

    pub fn build(self) -> Result<InitialDensity> {
        let mass = self.profile.mass();
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::NotNormalizable {
                profile: self.profile.name().into(),
                reason: format!("total mass {mass}"),
            });
        }
        if mass >= 1.0 {
            return Err(Error::validation(
                "profile.mass",
                format!("initial total charge {mass} must be < 1"),
            ));
        }
        if !(self.moment_order > 6.0) {
            return Err(Error::validation(
                "moment_order",
                format!("m0 = {} must exceed 6", self.moment_order),
            ));
        }
        if self.charge_center.iter().chain(self.charge_velocity.iter()).any(|c| !c.is_finite()) {
            return Err(Error::validation("charge", "non-finite initial state"));
        }
        let alpha = self.profile.local_exponent(&self.charge_center);
        let needed = self.moment_order / 2.0 - 3.0;
        if alpha < needed {
            return Err(Error::validation(
                "profile",
                format!(
                    "density behaves like |x - xi0|^{alpha} near the charge; moments up to m0 = {} need exponent >= {needed}",
                    self.moment_order
                ),
            ));
        }
        if !self.profile.sup().is_finite() {
            return Err(Error::validation("profile", "density must be bounded"));
        }
        let energy = self.profile.energy(&self.charge_center, &self.charge_velocity);
        if !energy.is_finite() {
            return Err(Error::validation("profile", "initial energy is not finite"));
        }
        Ok(InitialDensity {
            profile: self.profile,
            charge_center: self.charge_center,
            charge_velocity: self.charge_velocity,
            near_charge_exponent: alpha,
            total_mass: mass,
            moment_order: self.moment_order,
            initial_energy: energy,
        })
    }
}
