//! Unnormalized target densities and pole-data ingestion.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Error, Result};
use crate::jets::Scalar;
use crate::manifolds::{AmbientPoint, ManifoldKind, ScalarField};
use crate::special::ln_x_over_sinh;

/// Standard Gaussian on `ℝ^d`, `log π(x) = −½‖x‖²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianTarget {
    d: usize,
}

impl GaussianTarget {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("Gaussian dimension must be at least 1"));
        }
        Ok(GaussianTarget { d })
    }

    pub fn dim(&self) -> usize {
        self.d
    }
}

impl ScalarField for GaussianTarget {
    fn eval<T: Scalar>(&self, x: &[T]) -> Result<T> {
        if x.len() != self.d {
            return Err(Error::Dimension { expected: self.d, got: x.len() });
        }
        Ok(crate::jets::dot(x, x) * -0.5)
    }
}

/// von Mises-Fisher on `𝕊²`, `log π(x) = cᵀx`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VonMisesFisherTarget {
    c: [f64; 3],
}

impl VonMisesFisherTarget {
    pub fn new(c: [f64; 3]) -> Result<Self> {
        if c.iter().any(|v| !v.is_finite()) || c.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidArgument("vMF concentration vector must be finite and nonzero"));
        }
        Ok(VonMisesFisherTarget { c })
    }

    pub fn c(&self) -> [f64; 3] {
        self.c
    }

    pub fn concentration(&self) -> f64 {
        libm::sqrt(self.c.iter().map(|v| v * v).sum())
    }
}

impl ScalarField for VonMisesFisherTarget {
    fn eval<T: Scalar>(&self, x: &[T]) -> Result<T> {
        if x.len() != 3 {
            return Err(Error::Dimension { expected: 3, got: x.len() });
        }
        Ok(x[0] * self.c[0] + x[1] * self.c[1] + x[2] * self.c[2])
    }
}

/// Conjugate posterior over the mean direction `μ` and concentration `κ`
/// of a von Mises-Fisher model for unit-vector observations.
///
/// `log π(μ, κ) = (c₀ + n)·[½ log κ − log I_{½}(κ)] + R_n κ μ_nᵀμ`, which up
/// to a constant is `(c₀ + n)·ln(κ / sinh κ) + R_n κ μ_nᵀμ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PaleoPosterior {
    data: Vec<[f64; 3]>,
    c0: f64,
    r0: f64,
    mu0: [f64; 3],
    rn: f64,
    mun: [f64; 3],
}

const UNIT_DATA_TOL: f64 = 1e-9;

impl PaleoPosterior {
    pub fn new(data: Vec<[f64; 3]>, c0: f64, r0: f64, mu0: [f64; 3]) -> Result<Self> {
        if !(c0.is_finite() && c0 >= 0.0 && r0.is_finite() && r0 >= 0.0) {
            return Err(Error::InvalidArgument("prior c0 and R0 must be finite and nonnegative"));
        }
        let unit = |v: &[f64; 3]| (libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) - 1.0).abs() <= UNIT_DATA_TOL;
        if !unit(&mu0) {
            return Err(Error::InvalidArgument("prior direction mu0 must be a unit vector"));
        }
        if data.iter().any(|y| !unit(y)) {
            return Err(Error::InvalidArgument("observations must be unit vectors"));
        }
        let mut s = [r0 * mu0[0], r0 * mu0[1], r0 * mu0[2]];
        for y in &data {
            for i in 0..3 {
                s[i] += y[i];
            }
        }
        let rn = libm::sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2]);
        if !(rn > 0.0) {
            return Err(Error::InvalidArgument("resultant R_n vanishes; posterior mean direction undefined"));
        }
        let shape = c0 + data.len() as f64;
        if shape <= rn {
            return Err(Error::NotIntegrable { shape, rn });
        }
        let mun = [s[0] / rn, s[1] / rn, s[2] / rn];
        Ok(PaleoPosterior { data, c0, r0, mu0, rn, mun })
    }

    /// Posterior with the flat default prior `c₀ = 0, R₀ = 0`.
    pub fn with_flat_prior(data: Vec<[f64; 3]>) -> Result<Self> {
        Self::new(data, 0.0, 0.0, [0.0, 0.0, 1.0])
    }

    pub fn data(&self) -> &[[f64; 3]] {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.data.len()
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn mu0(&self) -> [f64; 3] {
        self.mu0
    }

    pub fn rn(&self) -> f64 {
        self.rn
    }

    pub fn mun(&self) -> [f64; 3] {
        self.mun
    }

    /// `c₀ + n`.
    pub fn shape(&self) -> f64 {
        self.c0 + self.data.len() as f64
    }

    /// Log of the concentration heuristic `π̃(κ)` up to an additive
    /// constant; finite at `κ = 0` where it takes its limit.
    pub fn log_kappa_heuristic_unnormalized(&self, kappa: f64) -> f64 {
        self.shape() * ln_x_over_sinh(kappa)[0] + self.rn * kappa
    }

    /// The maximizer of `π̃`.
    pub fn kappa_mode(&self) -> f64 {
        // d/dκ log π̃ = shape·(1/κ − coth κ) + Rn is decreasing from Rn to Rn − shape
        let slope = |k: f64| self.shape() * ln_x_over_sinh(k)[1] + self.rn;
        let mut hi = 1.0;
        while slope(hi) > 0.0 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
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

    /// `π̃(κ) / π̃(κ_mode)`.
    pub fn kappa_marginal_heuristic(&self, kappa: f64) -> Result<f64> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::Domain("kappa must be positive"));
        }
        let top = self.log_kappa_heuristic_unnormalized(self.kappa_mode());
        Ok(libm::exp(self.log_kappa_heuristic_unnormalized(kappa) - top))
    }

    /// The interval on which `log π̃` lies within `nats` of its maximum. The
    /// lower end is `0` when the heuristic never drops that far on the left.
    pub fn kappa_range(&self, nats: f64) -> (f64, f64) {
        let mode = self.kappa_mode();
        let floor = self.log_kappa_heuristic_unnormalized(mode) - nats;
        let above = |k: f64| self.log_kappa_heuristic_unnormalized(k) >= floor;

        let mut step = mode.max(1.0);
        let mut hi = mode + step;
        while above(hi) {
            step *= 2.0;
            hi = mode + step;
        }
        let upper = bisect(mode, hi, &above);

        let lower = if above(0.0) { 0.0 } else { bisect(mode, 0.0, &above) };
        (lower, upper)
    }

    /// Truncation point of the concentration domain, 60 nats below the mode.
    pub fn kappa_max(&self) -> f64 {
        self.kappa_range(KAPPA_TRUNCATION_NATS).1
    }
}

pub const KAPPA_TRUNCATION_NATS: f64 = 60.0;

/// Boundary between `inside` (where `pred` holds) and `outside`.
fn bisect(mut inside: f64, mut outside: f64, pred: &impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if pred(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

impl ScalarField for PaleoPosterior {
    fn eval<T: Scalar>(&self, x: &[T]) -> Result<T> {
        if x.len() != 4 {
            return Err(Error::Dimension { expected: 4, got: x.len() });
        }
        let kappa = x[3];
        if !(kappa.real() > 0.0) {
            return Err(Error::Domain("kappa must be positive"));
        }
        let lf = kappa.map_derivs(&ln_x_over_sinh(kappa.real()));
        let align = x[0] * self.mun[0] + x[1] * self.mun[1] + x[2] * self.mun[2];
        Ok(lf * self.shape() + kappa * align * self.rn)
    }
}

/// Any of the supported targets.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Gaussian(GaussianTarget),
    VonMisesFisher(VonMisesFisherTarget),
    Paleo(PaleoPosterior),
}

impl Target {
    pub fn manifold(&self) -> ManifoldKind {
        match self {
            Target::Gaussian(g) => ManifoldKind::Euclidean(g.d),
            Target::VonMisesFisher(_) => ManifoldKind::Sphere2,
            Target::Paleo(_) => ManifoldKind::Sphere2CrossRPlus,
        }
    }

    pub fn log_density(&self, at: &AmbientPoint) -> Result<f64> {
        self.manifold().check_point(at.coords())?;
        self.eval(at.coords())
    }
}

impl ScalarField for Target {
    fn eval<T: Scalar>(&self, x: &[T]) -> Result<T> {
        match self {
            Target::Gaussian(t) => t.eval(x),
            Target::VonMisesFisher(t) => t.eval(x),
            Target::Paleo(t) => t.eval(x),
        }
    }
}

impl From<GaussianTarget> for Target {
    fn from(t: GaussianTarget) -> Self {
        Target::Gaussian(t)
    }
}

impl From<VonMisesFisherTarget> for Target {
    fn from(t: VonMisesFisherTarget) -> Self {
        Target::VonMisesFisher(t)
    }
}

impl From<PaleoPosterior> for Target {
    fn from(t: PaleoPosterior) -> Self {
        Target::Paleo(t)
    }
}

/// Row layout of a pole-data file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoleFormat {
    /// Cartesian unit vectors, header `y1,y2,y3`.
    Xyz,
    /// Latitude and longitude in degrees, header `lat_deg,lon_deg`.
    LatLon,
}

impl PoleFormat {
    fn header(self) -> &'static str {
        match self {
            PoleFormat::Xyz => "y1,y2,y3",
            PoleFormat::LatLon => "lat_deg,lon_deg",
        }
    }

    fn columns(self) -> usize {
        match self {
            PoleFormat::Xyz => 3,
            PoleFormat::LatLon => 2,
        }
    }
}

/// Parses pole data. Blank lines and `#` comments are skipped, and the first
/// record may be the format's header. Cartesian rows with norm in
/// `[0.99, 1.01]` are renormalized unless already unit to rounding.
pub fn parse_pole_data(text: &str, format: PoleFormat) -> Result<Vec<[f64; 3]>> {
    let mut out = Vec::new();
    let mut first_record = true;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if first_record {
            first_record = false;
            let compact: String = line.chars().filter(|c| !c.is_whitespace()).collect();
            if compact.eq_ignore_ascii_case(format.header()) {
                continue;
            }
            if compact.eq_ignore_ascii_case(PoleFormat::Xyz.header())
                || compact.eq_ignore_ascii_case(PoleFormat::LatLon.header())
            {
                return Err(Error::Parse { line: line_no, message: format!("header `{line}` does not match {format:?}") });
            }
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != format.columns() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {} fields, found {}", format.columns(), fields.len()),
            });
        }
        let mut vals = [0.0; 3];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { line: line_no, message: format!("`{f}` is not a finite number") })?;
        }
        out.push(match format {
            PoleFormat::Xyz => xyz_row(vals, line_no)?,
            PoleFormat::LatLon => latlon_row(vals[0], vals[1], line_no)?,
        });
    }
    Ok(out)
}

fn xyz_row(v: [f64; 3], line: usize) -> Result<[f64; 3]> {
    let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let n = libm::sqrt(n2);
    if !(0.99..=1.01).contains(&n) {
        return Err(Error::Validation { line, message: format!("row norm {n} outside [0.99, 1.01]") });
    }
    if (n2 - 1.0).abs() <= 4.0 * f64::EPSILON {
        return Ok(v);
    }
    Ok([v[0] / n, v[1] / n, v[2] / n])
}

fn latlon_row(lat: f64, lon: f64, line: usize) -> Result<[f64; 3]> {
    if !(-90.0..=90.0).contains(&lat) {
        return Err(Error::Validation { line, message: format!("latitude {lat} outside [-90, 90]") });
    }
    if !(-180.0..360.0).contains(&lon) {
        return Err(Error::Validation { line, message: format!("longitude {lon} outside [-180, 360)") });
    }
    let (slat, clat) = sin_cos_degrees(lat);
    let (slon, clon) = sin_cos_degrees(lon);
    Ok([clat * clon, clat * slon, slat])
}

/// Sine and cosine of an angle in degrees, exact at multiples of 90°.
fn sin_cos_degrees(deg: f64) -> (f64, f64) {
    let quarter = deg / 90.0;
    if quarter == libm::round(quarter) {
        return match (quarter as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        };
    }
    libm::sincos(deg.to_radians())
}

/// Writes unit vectors as an `xyz` pole file with shortest round-trip
/// formatting, so parsing the output reproduces the input bit for bit.
pub fn format_pole_data_xyz(data: &[[f64; 3]]) -> String {
    let mut s = String::from("y1,y2,y3\n");
    for y in data {
        let _ = writeln!(s, "{:?},{:?},{:?}", y[0], y[1], y[2]);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::Jet2;
    use proptest::prelude::*;

    fn posterior() -> PaleoPosterior {
        let data = alloc::vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.6, 0.8]];
        PaleoPosterior::with_flat_prior(data).unwrap()
    }

    #[test]
    fn simple_values() {
        let g = Target::Gaussian(GaussianTarget::new(2).unwrap());
        assert_eq!(g.log_density(&AmbientPoint::euclidean(alloc::vec![0.0, 0.0]).unwrap()).unwrap(), 0.0);
        let v = Target::VonMisesFisher(VonMisesFisherTarget::new([1.0, 0.0, 0.0]).unwrap());
        assert_eq!(v.log_density(&AmbientPoint::on_sphere([1.0, 0.0, 0.0]).unwrap()).unwrap(), 1.0);
        let p = PaleoPosterior::with_flat_prior(alloc::vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        assert!((p.rn() - libm::sqrt(2.0)).abs() < 1e-15);
        assert!((p.mun()[0] - libm::sqrt(0.5)).abs() < 1e-15);
        assert!((p.mun()[1] - libm::sqrt(0.5)).abs() < 1e-15);
    }

    #[test]
    fn non_integrable_posterior_rejected() {
        let err = PaleoPosterior::with_flat_prior(alloc::vec![[0.0, 0.0, 1.0]; 3]).unwrap_err();
        assert!(matches!(err, Error::NotIntegrable { .. }));
    }

    #[test]
    fn paleo_log_density_matches_bessel_form() {
        let p = posterior();
        let (mu, kappa) = ([0.0, 0.0, 1.0], 2.5);
        let got = p.eval(&[mu[0], mu[1], mu[2], kappa]).unwrap();
        // (c0 + n)[½ ln κ − ln I½(κ)] with I½(κ) = √(2/(πκ)) sinh κ, minus its constant ½ ln(π/2)
        let i_half = libm::sqrt(2.0 / (core::f64::consts::PI * kappa)) * libm::sinh(kappa);
        let bessel = p.shape() * (0.5 * libm::log(kappa) - libm::log(i_half))
            + p.rn() * kappa * (p.mun()[2]);
        let offset = p.shape() * 0.5 * libm::log(core::f64::consts::PI / 2.0);
        assert!((got + offset - bessel).abs() < 1e-12);
        assert!(p.eval(&[0.0, 0.0, 1.0, 0.0]).is_err());
        let j = Jet2::<f64, 4>::seed(&[0.0, 0.0, 1.0, 1e6]);
        assert!(p.eval(&j).unwrap().value.is_finite());
    }

    #[test]
    fn kappa_heuristic_behaviour() {
        let p = posterior();
        assert!(p.log_kappa_heuristic_unnormalized(1e-8).is_finite());
        let mode = p.kappa_mode();
        let v = p.kappa_marginal_heuristic(mode).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let (lo, hi) = p.kappa_range(60.0);
        assert!(lo >= 0.0 && hi > mode);
        let top = p.log_kappa_heuristic_unnormalized(mode);
        assert!((p.log_kappa_heuristic_unnormalized(hi) - (top - 60.0)).abs() < 1e-8);
        let mut prev = p.log_kappa_heuristic_unnormalized(hi);
        for i in 1..20 {
            let cur = p.log_kappa_heuristic_unnormalized(hi * (1.0 + i as f64));
            assert!(cur < prev);
            prev = cur;
        }
        assert!(p.kappa_marginal_heuristic(0.0).is_err());
    }

    #[test]
    fn pole_rows() {
        let d = parse_pole_data("lat_deg,lon_deg\n90,0\n", PoleFormat::LatLon).unwrap();
        assert_eq!(d, alloc::vec![[0.0, 0.0, 1.0]]);
        let d = parse_pole_data("# comment\n0.999,0,0\n", PoleFormat::Xyz).unwrap();
        assert_eq!(d, alloc::vec![[1.0, 0.0, 0.0]]);
        assert!(matches!(parse_pole_data("y1,y2,y3\n0.5,0,0\n", PoleFormat::Xyz), Err(Error::Validation { line: 2, .. })));
        assert!(matches!(parse_pole_data("1,0\n", PoleFormat::Xyz), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_pole_data("\n\nabc,0\n", PoleFormat::LatLon), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_pole_data("95,0\n", PoleFormat::LatLon), Err(Error::Validation { .. })));
        assert!(matches!(parse_pole_data("0,360\n", PoleFormat::LatLon), Err(Error::Validation { .. })));
        assert!(parse_pole_data("lat_deg,lon_deg\n", PoleFormat::Xyz).is_err());
    }

    proptest! {
        #[test]
        fn pole_round_trip_is_bit_exact(raw in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 1..20)) {
            let data: Vec<[f64; 3]> = raw.iter().filter_map(|v| {
                let n = libm::sqrt(v[0]*v[0] + v[1]*v[1] + v[2]*v[2]);
                (n > 1e-3).then(|| [v[0]/n, v[1]/n, v[2]/n])
            }).collect();
            let text = format_pole_data_xyz(&data);
            let once = parse_pole_data(&text, PoleFormat::Xyz).unwrap();
            let twice = parse_pole_data(&format_pole_data_xyz(&once), PoleFormat::Xyz).unwrap();
            prop_assert_eq!(&once, &twice);
            for (a, b) in once.iter().zip(&data) {
                for i in 0..3 {
                    prop_assert!((a[i] - b[i]).abs() < 1e-15);
                }
            }
        }

        #[test]
        fn vmf_rotation_invariance(c in prop::array::uniform3(-3.0f64..3.0), x in prop::array::uniform3(-1.0f64..1.0), angle in 0.0f64..core::f64::consts::TAU) {
            prop_assume!(c.iter().any(|v| v.abs() > 1e-3));
            let (s, co) = libm::sincos(angle);
            let rot = |v: [f64; 3]| [co * v[0] - s * v[1], s * v[0] + co * v[1], v[2]];
            let a = VonMisesFisherTarget::new(c).unwrap().eval(&x).unwrap();
            let b = VonMisesFisherTarget::new(rot(c)).unwrap().eval(&rot(x)).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
