//! Constraint sets with Euclidean projection and the shrunk sets used by the
//! unit-sphere variant.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::vecops;

/// Absolute tolerance for membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetShape {
    Unconstrained,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

/// A closed convex set `X`, optionally with radii `r <= r_bar` such that
/// `r B ⊆ X ⊆ r_bar B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSet {
    shape: SetShape,
    inner_radius: Option<f64>,
    outer_radius: Option<f64>,
}

impl FeasibleSet {
    pub fn unconstrained() -> Self {
        Self {
            shape: SetShape::Unconstrained,
            inner_radius: None,
            outer_radius: None,
        }
    }

    /// Box `[lo, hi]`. Radii are filled in when the box contains the origin.
    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidParameter {
                name: "box",
                reason: "requires lo <= hi componentwise".into(),
            });
        }
        Ok(Self::from_shape(SetShape::Box { lo, hi }))
    }

    /// Symmetric box `[-half_width, half_width]^d`.
    pub fn cube(d: usize, half_width: f64) -> Result<Self> {
        Self::boxed(vec![-half_width; d], vec![half_width; d])
    }

    /// Euclidean ball. Radii are filled in when the center is the origin.
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "radius",
                reason: format!("must be positive, got {radius}"),
            });
        }
        Ok(Self::from_shape(SetShape::Ball { center, radius }))
    }

    pub fn from_shape(shape: SetShape) -> Self {
        let (inner_radius, outer_radius) = natural_radii(&shape);
        Self {
            shape,
            inner_radius,
            outer_radius,
        }
    }

    /// Overrides the radii, checking `r <= r_bar` and `r B ⊆ X ⊆ r_bar B`.
    pub fn with_radii(mut self, inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && inner <= outer) {
            return Err(Error::InvalidParameter {
                name: "radii",
                reason: format!("need 0 < r <= r_bar, got r={inner}, r_bar={outer}"),
            });
        }
        let (natural_inner, natural_outer) = natural_radii(&self.shape);
        let inner_ok = natural_inner.is_some_and(|n| inner <= n + MEMBERSHIP_TOL);
        let outer_ok = natural_outer.is_some_and(|n| outer >= n - MEMBERSHIP_TOL);
        if !(inner_ok && outer_ok) {
            return Err(Error::InvalidParameter {
                name: "radii",
                reason: "r B ⊆ X ⊆ r_bar B does not hold".into(),
            });
        }
        self.inner_radius = Some(inner);
        self.outer_radius = Some(outer);
        Ok(self)
    }

    pub fn shape(&self) -> &SetShape {
        &self.shape
    }

    pub fn inner_radius(&self) -> Option<f64> {
        self.inner_radius
    }

    pub fn outer_radius(&self) -> Option<f64> {
        self.outer_radius
    }

    /// Dimension fixed by the set, if any.
    pub fn dimension(&self) -> Option<usize> {
        match &self.shape {
            SetShape::Unconstrained => None,
            SetShape::Box { lo, .. } => Some(lo.len()),
            SetShape::Ball { center, .. } => Some(center.len()),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        match self.dimension() {
            Some(d) => check_dim(d, x.len()),
            None => Ok(()),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        self.check_point(x)?;
        Ok(match &self.shape {
            SetShape::Unconstrained => true,
            SetShape::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol),
            SetShape::Ball { center, radius } => vecops::dist(x, center) <= radius + tol,
        })
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok(match &self.shape {
            SetShape::Unconstrained => x.to_vec(),
            SetShape::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| v.clamp(*l, *h))
                .collect(),
            SetShape::Ball { center, radius } => {
                let dist = vecops::dist(x, center);
                if dist <= *radius {
                    x.to_vec()
                } else {
                    // Rounding can leave the scaled point an ulp outside the
                    // ball, which would break idempotence; shrink until it
                    // lands inside.
                    let mut s = radius / dist;
                    loop {
                        let p: Vec<f64> = x.iter().zip(center).map(|(v, c)| c + s * (v - c)).collect();
                        if vecops::dist(&p, center) <= *radius {
                            break p;
                        }
                        s = s.next_down();
                    }
                }
            }
        })
    }

    /// The scaled set `(1 - xi) X`. Only sets that are star-shaped about the
    /// origin (origin-centered balls, boxes containing the origin) qualify.
    pub fn shrink(&self, xi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&xi) {
            return Err(Error::InvalidParameter {
                name: "xi",
                reason: format!("must lie in [0, 1], got {xi}"),
            });
        }
        let s = 1.0 - xi;
        let shape = match &self.shape {
            SetShape::Unconstrained => SetShape::Unconstrained,
            SetShape::Box { lo, hi } => {
                if lo.iter().zip(hi).any(|(l, h)| *l > 0.0 || *h < 0.0) {
                    return Err(Error::UnsupportedShrink("box does not contain the origin".into()));
                }
                SetShape::Box {
                    lo: vecops::scale(lo, s),
                    hi: vecops::scale(hi, s),
                }
            }
            SetShape::Ball { center, radius } => {
                if center.iter().any(|&c| c != 0.0) {
                    return Err(Error::UnsupportedShrink("ball is not centered at the origin".into()));
                }
                SetShape::Ball {
                    center: center.clone(),
                    radius: radius * s,
                }
            }
        };
        Ok(Self {
            shape,
            inner_radius: self.inner_radius.map(|r| r * s),
            outer_radius: self.outer_radius.map(|r| r * s),
        })
    }

    /// Whether `1 >= xi >= delta / r`, which keeps every `x + delta u` with
    /// `x ∈ (1 - xi) X` and `|u| = 1` inside `X`.
    pub fn feasibility_margin(&self, xi: f64, delta: f64) -> Result<bool> {
        let r = self.inner_radius.ok_or(Error::MissingInnerRadius)?;
        Ok(xi <= 1.0 && xi >= delta / r)
    }
}

fn natural_radii(shape: &SetShape) -> (Option<f64>, Option<f64>) {
    match shape {
        SetShape::Unconstrained => (None, None),
        SetShape::Box { lo, hi } => {
            let contains_origin = lo.iter().zip(hi).all(|(l, h)| *l <= 0.0 && *h >= 0.0);
            if !contains_origin {
                return (None, None);
            }
            let inner = lo
                .iter()
                .zip(hi)
                .map(|(l, h)| (-l).min(*h))
                .fold(f64::INFINITY, f64::min);
            let outer = lo
                .iter()
                .zip(hi)
                .map(|(l, h)| l.abs().max(h.abs()).powi(2))
                .sum::<f64>()
                .sqrt();
            (Some(inner).filter(|r| *r > 0.0), Some(outer))
        }
        SetShape::Ball { center, radius } => {
            if center.iter().all(|&c| c == 0.0) {
                (Some(*radius).filter(|r| *r > 0.0), Some(*radius))
            } else {
                (None, None)
            }
        }
    }
}
