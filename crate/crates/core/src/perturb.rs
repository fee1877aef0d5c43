//! Grid net of directions on the unit ℓ∞ sphere and column snapping.
//!
//! With grid resolution `G`, the net holds every vector of
//! `{0, 1/G, 2/G, …, 1}^m` whose largest coordinate is 1, so `δ = 1/G` and
//! `|Q| = (G+1)^m − G^m`. Every nonnegative unit-ℓ∞ vector is within `δ/2`
//! of the net in ℓ∞. Snapping replaces a column `a` by `‖a‖∞·q` where `q` is
//! the net direction closest to `a/‖a‖∞`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::PackingInstance;

/// Largest net [`build_delta_net`] will enumerate.
pub const DEFAULT_NET_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaNet {
    pub m: usize,
    /// `G = 1/δ`.
    pub grid: u32,
    pub delta: f64,
    /// Grid coordinates of every direction, lexicographically ordered.
    directions: Vec<Vec<u32>>,
}

/// `(G+1)^m − G^m`, or `None` on overflow.
pub fn net_size(m: usize, grid: u32) -> Option<u128> {
    let m = u32::try_from(m).ok()?;
    let g = u128::from(grid);
    Some((g + 1).checked_pow(m)? - g.checked_pow(m)?)
}

/// Grid resolution `ceil((m+1)/ε)`, so `δ = 1/G ≤ ε/(m+1)`.
pub fn grid_for(m: usize, epsilon: f64) -> Result<u32> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::param(format!("epsilon {epsilon} must lie in (0,1]")));
    }
    if m == 0 {
        return Err(Error::param("m must be at least 1"));
    }
    let ratio = (m + 1) as f64 / epsilon;
    // absorb representation error in ε (e.g. 3/0.1 = 30.000000000000004)
    let g = (ratio * (1.0 - 1e-12)).ceil();
    if g > f64::from(u32::MAX) {
        return Err(Error::param(format!("epsilon {epsilon} is too small for a grid net")));
    }
    Ok(g as u32)
}

pub fn build_delta_net(m: usize, epsilon: f64) -> Result<DeltaNet> {
    DeltaNet::with_grid(m, grid_for(m, epsilon)?, DEFAULT_NET_CAP)
}

impl DeltaNet {
    /// Enumerates the net of resolution `grid`, refusing nets larger than `cap`.
    pub fn with_grid(m: usize, grid: u32, cap: usize) -> Result<Self> {
        if m == 0 || grid == 0 {
            return Err(Error::param("net needs m >= 1 and grid >= 1"));
        }
        let size = net_size(m, grid).unwrap_or(u128::MAX);
        if size > cap as u128 {
            return Err(Error::NetTooLarge { size, cap });
        }
        let mut directions = Vec::with_capacity(size as usize);
        let mut v = vec![0u32; m];
        loop {
            if v.contains(&grid) {
                directions.push(v.clone());
            }
            // odometer increment, last coordinate fastest, giving lexicographic order
            let mut k = m;
            loop {
                if k == 0 {
                    return Ok(DeltaNet { m, grid, delta: 1.0 / f64::from(grid), directions });
                }
                k -= 1;
                if v[k] < grid {
                    v[k] += 1;
                    break;
                }
                v[k] = 0;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    fn coord(&self, g: u32) -> f64 {
        f64::from(g) / f64::from(self.grid)
    }

    /// Direction `k` as real coordinates.
    pub fn direction(&self, k: usize) -> Vec<f64> {
        self.directions[k].iter().map(|&g| self.coord(g)).collect()
    }

    pub fn directions(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|k| self.direction(k))
    }

    /// Closest net direction to the unit-ℓ∞ vector `v`, ties broken towards
    /// the lexicographically smallest direction.
    ///
    /// The ℓ∞ distance separates over coordinates, and the coordinate where
    /// `v` equals 1 always rounds to the top of the grid, so the optimum is
    /// coordinatewise: find the best achievable distance, then take in each
    /// coordinate the smallest grid value within it.
    pub fn nearest(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.m);
        let g = f64::from(self.grid);
        let candidates = |x: f64| {
            let lo = (x * g).floor().clamp(0.0, g) as u32;
            [lo, (lo + 1).min(self.grid)]
        };
        let best = v
            .iter()
            .map(|&x| {
                candidates(x).iter().map(|&c| (x - self.coord(c)).abs()).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        v.iter()
            .map(|&x| {
                let [lo, hi] = candidates(x);
                let c = if (x - self.coord(lo)).abs() <= best { lo } else { hi };
                self.coord(c)
            })
            .collect()
    }

    /// Same as [`DeltaNet::nearest`] by exhaustive scan over the net.
    pub fn nearest_by_scan(&self, v: &[f64]) -> Vec<f64> {
        let mut best = (f64::INFINITY, 0);
        for k in 0..self.len() {
            let d = self.directions[k]
                .iter()
                .zip(v)
                .map(|(&c, x)| (x - self.coord(c)).abs())
                .fold(0.0, f64::max);
            if d < best.0 {
                best = (d, k);
            }
        }
        self.direction(best.1)
    }

    /// Snaps a nonzero column: returns `(q, ‖a‖∞·q)`.
    pub fn snap_column(&self, a: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if a.len() != self.m {
            return Err(Error::param(format!("column has {} entries, net has m = {}", a.len(), self.m)));
        }
        let norm = a.iter().copied().fold(0.0, f64::max);
        if norm <= 0.0 {
            return Err(Error::param("cannot snap a zero column"));
        }
        let v: Vec<f64> = a.iter().map(|x| x / norm).collect();
        let q = self.nearest(&v);
        let snapped = q.iter().map(|x| norm * x).collect();
        Ok((q, snapped))
    }
}

/// Snaps every column onto `net` and scales the budget to `(1-ε)B`.
/// Rewards are left unchanged.
pub fn perturb_with_net(instance: &PackingInstance, net: &DeltaNet, epsilon: f64) -> Result<PackingInstance> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param(format!("epsilon {epsilon} must lie in (0,1)")));
    }
    if net.m != instance.m {
        return Err(Error::param("net dimension does not match the instance"));
    }
    let columns = instance
        .columns
        .iter()
        .map(|a| net.snap_column(a).map(|(_, s)| s))
        .collect::<Result<Vec<_>>>()?;
    PackingInstance::new(instance.rewards.clone(), columns, (1.0 - epsilon) * instance.budget)
}

/// Builds the net for `(m, ε)` and applies [`perturb_with_net`].
pub fn perturb_instance(instance: &PackingInstance, epsilon: f64) -> Result<(PackingInstance, DeltaNet)> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param(format!("epsilon {epsilon} must lie in (0,1)")));
    }
    let net = build_delta_net(instance.m, epsilon)?;
    let perturbed = perturb_with_net(instance, &net, epsilon)?;
    Ok((perturbed, net))
}
