//! The seven interaction families and their integer data.
//!
//! Each family R fixes the size of the extended lattice behind its
//! theta-function basis (the modulus multiplier N_R), the frequency
//! offsets J_R(j) of the basis elements, symmetry data for the basis
//! (single-term, difference, or sum combinations and the half-period
//! shift), and the eta-function power appearing in the normalization
//! of its determinant identities. Families B, B-dual, C, C-dual carry
//! an extra single-variable factor controlled by the pair (c1, c2).
//!
//! Processes of families B, C, D live in the open alcove
//! 0 < x_1 < ... < x_N < pi r; family A lives on the circle of
//! circumference 2 pi r.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modular::ProcessClock;
use crate::rng::CounterRng;

/// Minimum spacing of randomly drawn configurations, as a fraction of
/// the alcove length pi r.
pub const MIN_GAP_FRACTION: f64 = 0.02;

/// Interaction family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
    /// Dual of B (written B-vee).
    BDual,
    C,
    /// Dual of C (written C-vee).
    CDual,
    BC,
    D,
}

/// How the two exponential half-terms of a basis element combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairCombination {
    /// Family A: a single term, no reflected partner.
    Single,
    /// a(z) - a(-z): odd combinations (B, B-dual, C, C-dual, BC).
    Difference,
    /// a(z) + a(-z): even combinations (D).
    Sum,
}

impl Family {
    /// All seven families in canonical order.
    pub const ALL: [Family; 7] = [
        Family::A,
        Family::B,
        Family::BDual,
        Family::C,
        Family::CDual,
        Family::BC,
        Family::D,
    ];

    /// Modulus multiplier N_R: the basis uses theta functions with
    /// modular parameter N_R tau.
    pub fn cal_n(&self, n: usize) -> usize {
        match self {
            Family::A => n,
            Family::B => 2 * n - 1,
            Family::BDual | Family::CDual => 2 * n,
            Family::C => 2 * (n + 1),
            Family::BC => 2 * n + 1,
            Family::D => 2 * (n.saturating_sub(1)),
        }
    }

    /// Frequency offset J_R(j) of the j-th basis element, j = 1..=n.
    pub fn j_index(&self, j: usize) -> f64 {
        match self {
            Family::A | Family::B | Family::BDual | Family::D => j as f64 - 1.0,
            Family::C | Family::BC => j as f64,
            Family::CDual => j as f64 - 0.5,
        }
    }

    /// Center of mass offset kappa_n used by the family A basis.
    pub fn kappa(n: usize, r: f64) -> f64 {
        if n % 2 == 0 {
            PI * r * (n as f64 - 1.0)
        } else {
            PI * r * (n as f64 - 2.0)
        }
    }

    /// Half-period shift of the theta argument in the basis elements.
    pub fn basis_shift(&self, n: usize) -> f64 {
        match self {
            // (1 - (-1)^n) / 4: one half for odd n, zero for even.
            Family::A => {
                if n % 2 == 0 {
                    0.0
                } else {
                    0.5
                }
            }
            Family::B | Family::BDual => 0.0,
            Family::C | Family::CDual | Family::BC | Family::D => 0.5,
        }
    }

    /// Term combination of the basis elements.
    pub fn combination(&self) -> PairCombination {
        match self {
            Family::A => PairCombination::Single,
            Family::D => PairCombination::Sum,
            _ => PairCombination::Difference,
        }
    }

    /// Argument/modulus scaling (c1, c2) of the single-variable factor
    /// for the four families that have a plain theta_1 there.
    pub fn c1c2(&self) -> Option<(f64, f64)> {
        match self {
            Family::B => Some((1.0, 1.0)),
            Family::BDual => Some((2.0, 2.0)),
            Family::C => Some((2.0, 1.0)),
            Family::CDual => Some((1.0, 0.5)),
            _ => None,
        }
    }

    /// Exponents of the eta-function normalization: the determinant
    /// prefactor is prod_i eta(s_i tau)^{e_i} over returned (s_i, e_i).
    pub fn eta_exponents(&self, n: usize) -> Vec<(f64, i64)> {
        let ni = n as i64;
        match self {
            Family::A => vec![(1.0, -(ni - 1) * (ni - 2) / 2)],
            Family::B | Family::C => vec![(1.0, -ni * (ni - 1))],
            Family::BDual => vec![(1.0, -(ni - 1) * (ni - 1)), (2.0, -(ni - 1))],
            Family::CDual => vec![(1.0, -(ni - 1) * (ni - 1)), (0.5, -(ni - 1))],
            Family::BC => vec![(1.0, -ni * (ni - 1)), (2.0, -ni)],
            Family::D => vec![(1.0, -ni * (ni - 2))],
        }
    }

    /// Deterministic configuration the process pins to as t -> t*,
    /// for the four families with an associated particle system.
    pub fn pinning_target(&self, n: usize, r: f64) -> Option<Vec<f64>> {
        let nf = n as f64;
        match self {
            Family::A => Some(
                (1..=n)
                    .map(|j| {
                        if n % 2 == 0 {
                            PI * r * (2.0 * j as f64 - 1.0) / nf
                        } else {
                            2.0 * PI * r * (j as f64 - 1.0) / nf
                        }
                    })
                    .collect(),
            ),
            Family::B => Some(
                (1..=n)
                    .map(|j| (2.0 * j as f64 - 1.0) * PI * r / (2.0 * nf - 1.0))
                    .collect(),
            ),
            Family::C => Some((1..=n).map(|j| j as f64 * PI * r / (nf + 1.0)).collect()),
            Family::D => Some(
                (1..=n)
                    .map(|j| (j as f64 - 1.0) * PI * r / (nf - 1.0))
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Smallest particle number the family supports.
    pub fn min_n(&self) -> usize {
        match self {
            Family::D => 2,
            _ => 1,
        }
    }

    /// True for the circle-valued family A, false for alcove families.
    pub fn on_circle(&self) -> bool {
        matches!(self, Family::A)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self {
            Family::A => "A",
            Family::B => "B",
            Family::BDual => "Bv",
            Family::C => "C",
            Family::CDual => "Cv",
            Family::BC => "BC",
            Family::D => "D",
        };
        f.write_str(tag)
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Family::A),
            "b" => Ok(Family::B),
            "bv" | "b-dual" | "bdual" => Ok(Family::BDual),
            "c" => Ok(Family::C),
            "cv" | "c-dual" | "cdual" => Ok(Family::CDual),
            "bc" => Ok(Family::BC),
            "d" => Ok(Family::D),
            other => Err(Error::InvalidArgument(format!(
                "unknown family tag {other:?}; expected one of a, b, bv, c, cv, bc, d"
            ))),
        }
    }
}

/// A validated problem instance: family, particle count, process clock,
/// and an admissible initial configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Config {
    pub family: Family,
    pub n: usize,
    pub clock: ProcessClock,
    /// Initial positions, strictly increasing; in (0, pi r) for alcove
    /// families and in [0, 2 pi r) for family A.
    pub u: Vec<f64>,
}

impl Config {
    pub fn new(family: Family, n: usize, clock: ProcessClock, u: Vec<f64>) -> Result<Self> {
        if n < family.min_n() {
            return Err(Error::InvalidArgument(format!(
                "family {family} needs at least {} particles, got {n}",
                family.min_n()
            )));
        }
        if u.len() != n {
            return Err(Error::InvalidArgument(format!(
                "configuration has {} entries, expected {n}",
                u.len()
            )));
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput("initial configuration"));
        }
        if u.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::DomainViolation(
                "initial configuration must be strictly increasing".into(),
            ));
        }
        let r = clock.r();
        if family.on_circle() {
            if u[0] < 0.0 || u[n - 1] >= 2.0 * PI * r {
                return Err(Error::DomainViolation(format!(
                    "family A configuration must lie in [0, 2 pi r) = [0, {})",
                    2.0 * PI * r
                )));
            }
        } else if u[0] <= 0.0 || u[n - 1] >= PI * r {
            return Err(Error::DomainViolation(format!(
                "configuration must lie strictly inside (0, pi r) = (0, {})",
                PI * r
            )));
        }
        Ok(Self {
            family,
            n,
            clock,
            u,
        })
    }

    /// Modulus multiplier for this instance.
    pub fn cal_n(&self) -> usize {
        self.family.cal_n(self.n)
    }

    /// Modular parameter tau(t) = i N_R (t* - t) / (2 pi r^2).
    pub fn tau_at(&self, t: f64) -> Result<crate::modular::ModularParam> {
        self.clock.tau_at(self.cal_n(), t)
    }

    /// Draws a random admissible configuration: sorted uniforms over the
    /// domain, re-drawn until all gaps (including wall distances for
    /// alcove families and the wrap-around gap for family A) reach
    /// [`MIN_GAP_FRACTION`] of pi r.
    pub fn random(family: Family, n: usize, clock: ProcessClock, seed: u64) -> Result<Self> {
        let r = clock.r();
        let gap = MIN_GAP_FRACTION * PI * r;
        let mut rng = CounterRng::stream(seed, 0xC0F1);
        for _attempt in 0..10_000 {
            let mut u: Vec<f64> = if family.on_circle() {
                (0..n).map(|_| rng.uniform() * 2.0 * PI * r).collect()
            } else {
                (0..n).map(|_| rng.uniform() * PI * r).collect()
            };
            u.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut ok = u.windows(2).all(|w| w[1] - w[0] >= gap);
            if family.on_circle() {
                if n > 1 {
                    ok &= (u[0] + 2.0 * PI * r) - u[n - 1] >= gap;
                }
            } else {
                ok &= u[0] >= gap && PI * r - u[n - 1] >= gap;
            }
            if ok {
                return Self::new(family, n, clock, u);
            }
        }
        Err(Error::InvalidArgument(format!(
            "could not draw {n} points with minimum gap {gap}; domain too crowded"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_sizes_match_family_table() {
        let n = 3;
        let want = [
            (Family::A, 3),
            (Family::B, 5),
            (Family::BDual, 6),
            (Family::C, 8),
            (Family::CDual, 6),
            (Family::BC, 7),
            (Family::D, 4),
        ];
        for (fam, cal_n) in want {
            assert_eq!(fam.cal_n(n), cal_n, "{fam}");
        }
    }

    #[test]
    fn frequency_offsets() {
        assert_eq!(Family::B.j_index(1), 0.0);
        assert_eq!(Family::C.j_index(1), 1.0);
        assert_eq!(Family::CDual.j_index(2), 1.5);
        assert_eq!(Family::D.j_index(4), 3.0);
    }

    #[test]
    fn round_trip_tags() {
        for fam in Family::ALL {
            let s = fam.to_string();
            assert_eq!(s.parse::<Family>().unwrap(), fam);
        }
        assert!("x".parse::<Family>().is_err());
    }

    #[test]
    fn pinning_targets_fill_the_alcove() {
        let r = 1.0;
        let v = Family::C.pinning_target(3, r).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v[0] > 0.0 && v[2] < PI * r);
        let d = Family::D.pinning_target(3, r).unwrap();
        assert_eq!(d[0], 0.0);
        assert!((d[2] - PI * r).abs() < 1e-15);
        let b = Family::B.pinning_target(2, r).unwrap();
        assert!((b[0] - PI * r / 3.0).abs() < 1e-15);
        assert!((b[1] - PI * r).abs() < 1e-15);
    }

    #[test]
    fn config_validation_rejects_bad_input() {
        let clock = ProcessClock::new(1.0, 1.0).unwrap();
        assert!(Config::new(Family::C, 2, clock, vec![0.5, 0.4]).is_err());
        assert!(Config::new(Family::C, 2, clock, vec![0.5, 4.0]).is_err());
        assert!(Config::new(Family::D, 1, clock, vec![0.5]).is_err());
        assert!(Config::new(Family::C, 2, clock, vec![0.5, 1.5]).is_ok());
        assert!(Config::new(Family::A, 2, clock, vec![0.5, 6.0]).is_ok());
    }

    #[test]
    fn random_configs_are_seeded_and_gapped() {
        let clock = ProcessClock::new(1.0, 1.0).unwrap();
        let a = Config::random(Family::D, 4, clock, 11).unwrap();
        let b = Config::random(Family::D, 4, clock, 11).unwrap();
        let c = Config::random(Family::D, 4, clock, 12).unwrap();
        assert_eq!(a.u, b.u);
        assert_ne!(a.u, c.u);
        let gap = MIN_GAP_FRACTION * PI;
        assert!(a.u.windows(2).all(|w| w[1] - w[0] >= gap));
        assert!(a.u[0] >= gap && PI - a.u[3] >= gap);
        let circ = Config::random(Family::A, 5, clock, 3).unwrap();
        assert!(circ.u[0] >= 0.0 && circ.u[4] < 2.0 * PI);
        assert!(circ.u[0] + 2.0 * PI - circ.u[4] >= gap);
    }
}
