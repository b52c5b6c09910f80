//! Halton points, nested designs built from sequence prefixes, and the
//! fill-distance / separation-radius diagnostics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::euclidean;

/// Axis-aligned box `[lower, upper]` in `d` dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::invalid("domain", "needs at least one dimension"));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::invalid(
                    "domain",
                    format!("axis {j}: need lower < upper, got {lo}:{hi}"),
                ));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }

    /// Parses `lo:hi[,lo:hi...]`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for part in text.split(',') {
            let (lo, hi) = part
                .split_once(':')
                .ok_or_else(|| Error::invalid("domain", format!("expected lo:hi, got `{part}`")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid("domain", format!("not a number: `{s}`")))
            };
            lower.push(parse(lo)?);
            upper.push(parse(hi)?);
        }
        Self::new(lower, upper)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .product()
    }

    /// Maps a point of `[0,1)^d` affinely into `[lower, upper)`.
    pub fn scale(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&u, (&lo, &hi))| {
                let x = lo + (hi - lo) * u;
                if x >= hi {
                    hi.next_down()
                } else {
                    x
                }
            })
            .collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&x, (&lo, &hi))| x >= lo && x <= hi)
    }
}

impl std::fmt::Display for DomainBox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| format!("{lo}:{hi}"))
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes: Vec<u64> = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while primes.len() < count {
        if primes
            .iter()
            .take_while(|&&p| p * p <= candidate)
            .all(|&p| !candidate.is_multiple_of(p))
        {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

/// Base-`base` radical inverse of `n`, rounded once from an exact fraction.
fn radical_inverse(mut n: u64, base: u64) -> f64 {
    let b = base as u128;
    let mut num: u128 = 0;
    let mut den: u128 = 1;
    while n > 0 {
        num = num * b + (n % base) as u128;
        den *= b;
        n /= base;
    }
    num as f64 / den as f64
}

/// Halton point number `index` (0-based) in `[0,1)^d`.
pub fn halton_point(index: u64, d: usize) -> Vec<f64> {
    first_primes(d)
        .into_iter()
        .map(|p| radical_inverse(index + 1, p))
        .collect()
}

/// First `n` Halton points scaled into `domain`.
pub fn halton_points(n: usize, domain: &DomainBox) -> Vec<Vec<f64>> {
    let primes = first_primes(domain.dim());
    (0..n as u64)
        .map(|i| {
            let u: Vec<f64> = primes.iter().map(|&p| radical_inverse(i + 1, p)).collect();
            domain.scale(&u)
        })
        .collect()
}

/// Point sets `X_0 ⊇ X_1 ⊇ … ⊇ X_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedDesign {
    levels: Vec<Vec<Vec<f64>>>,
    counts: Vec<usize>,
}

impl NestedDesign {
    /// Wraps explicit point sets, checking inclusion and distinctness.
    pub fn from_levels(levels: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if levels.is_empty() || levels[0].is_empty() {
            return Err(Error::EmptyPointSet);
        }
        let counts: Vec<usize> = levels.iter().map(Vec::len).collect();
        check_monotone(&counts)?;
        for i in 1..levels.len() {
            for p in &levels[i] {
                if !levels[i - 1].contains(p) {
                    return Err(Error::LevelMismatch(format!(
                        "point {p:?} of level {i} is missing from level {}",
                        i - 1
                    )));
                }
            }
        }
        for level in &levels {
            check_distinct(level)?;
        }
        Ok(Self { levels, counts })
    }

    pub fn levels(&self) -> &[Vec<Vec<f64>>] {
        &self.levels
    }

    pub fn level(&self, i: usize) -> &[Vec<f64>] {
        &self.levels[i]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Writes `X_0` as CSV, one row per point, with the deepest level holding it.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_levels_csv(&self.levels, out)
    }
}

pub(crate) fn check_monotone(counts: &[usize]) -> Result<()> {
    for (i, w) in counts.windows(2).enumerate() {
        if w[1] > w[0] {
            return Err(Error::NonMonotoneStructure {
                level: i + 1,
                prev: w[0],
                next: w[1],
            });
        }
    }
    Ok(())
}

fn check_distinct(points: &[Vec<f64>]) -> Result<()> {
    for j in 0..points.len() {
        for k in (j + 1)..points.len() {
            if points[j] == points[k] {
                return Err(Error::DuplicatePoints { first: j, second: k });
            }
        }
    }
    Ok(())
}

/// `X_i` is the first `n_i` Halton points in `domain`. Trailing levels may be empty.
pub fn build_nested_design(counts: &[usize], domain: &DomainBox) -> Result<NestedDesign> {
    if counts.is_empty() || counts[0] == 0 {
        return Err(Error::EmptyPointSet);
    }
    check_monotone(counts)?;
    let all = halton_points(counts[0], domain);
    let levels = counts.iter().map(|&n| all[..n].to_vec()).collect();
    Ok(NestedDesign {
        levels,
        counts: counts.to_vec(),
    })
}

/// Per-level Halton prefixes with no monotonicity requirement. Sets are
/// nested only where the counts happen to be non-increasing.
pub fn build_prefix_design(counts: &[usize], domain: &DomainBox) -> Vec<Vec<Vec<f64>>> {
    let max = counts.iter().copied().max().unwrap_or(0);
    let all = halton_points(max, domain);
    counts.iter().map(|&n| all[..n].to_vec()).collect()
}

/// CSV for per-level point sets. Rows are the union of all levels in
/// first-seen order; `level` is the highest level index holding the point.
pub fn write_levels_csv<W: Write>(levels: &[Vec<Vec<f64>>], mut out: W) -> Result<()> {
    let d = levels
        .iter()
        .flat_map(|l| l.first())
        .map(Vec::len)
        .next()
        .unwrap_or(0);
    let header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    writeln!(out, "{},level", header.join(","))?;
    let mut rows: Vec<(&Vec<f64>, usize)> = Vec::new();
    for (i, level) in levels.iter().enumerate() {
        for p in level {
            match rows.iter_mut().find(|(q, _)| *q == p) {
                Some(row) => row.1 = row.1.max(i),
                None => rows.push((p, i)),
            }
        }
    }
    for (p, level) in rows {
        let coords: Vec<String> = p.iter().map(|x| format!("{x}")).collect();
        writeln!(out, "{},{level}", coords.join(","))?;
    }
    Ok(())
}

/// Grid resolution per axis used when none is given.
pub fn default_grid_resolution(d: usize) -> usize {
    match d {
        0..=2 => 101,
        3..=4 => 21,
        _ => 7,
    }
}

/// Largest distance from a grid node of `domain` to its nearest point.
/// Never exceeds the true fill distance.
pub fn fill_distance(
    points: &[Vec<f64>],
    domain: &DomainBox,
    grid_resolution: Option<usize>,
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let d = domain.dim();
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: p.len(),
        });
    }
    let res = grid_resolution.unwrap_or_else(|| default_grid_resolution(d));
    if res < 2 {
        return Err(Error::invalid("grid_resolution", "must be at least 2"));
    }
    let total = res.checked_pow(d as u32).ok_or_else(|| {
        Error::invalid("grid_resolution", "grid too large for this dimension")
    })?;
    let mut node = vec![0.0; d];
    let mut worst = 0.0f64;
    for flat in 0..total {
        let mut rem = flat;
        for (j, x) in node.iter_mut().enumerate() {
            let step = rem % res;
            rem /= res;
            let t = step as f64 / (res - 1) as f64;
            *x = domain.lower[j] + (domain.upper[j] - domain.lower[j]) * t;
        }
        let nearest = points
            .iter()
            .map(|p| euclidean(&node, p))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(nearest);
    }
    Ok(worst)
}

/// Half the smallest pairwise distance.
pub fn separation_radius(points: &[Vec<f64>]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    let mut min = f64::INFINITY;
    for j in 0..points.len() {
        for k in (j + 1)..points.len() {
            min = min.min(euclidean(&points[j], &points[k]));
        }
    }
    Ok(min / 2.0)
}

/// Fill distance over separation radius.
pub fn quasi_uniformity_ratio(points: &[Vec<f64>], domain: &DomainBox) -> Result<f64> {
    let q = separation_radius(points)?;
    let h = fill_distance(points, domain, None)?;
    Ok(h / q)
}
