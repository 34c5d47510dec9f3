//! Poisson bipolar topologies on a square region with torus metric.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{AoiError, Result};
use crate::params::{Boundary, Region, SystemParams};
use crate::rng::stream_rng;

pub const TOPOLOGY_SCHEMA: &str = "# aoi-topology v1";

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Minimum-image displacement from `a` to `b`.
pub fn displacement(a: Point, b: Point, region: &Region) -> (f64, f64) {
    let mut dx = b.x - a.x;
    let mut dy = b.y - a.y;
    if region.boundary == Boundary::Torus {
        let s = region.side;
        dx -= s * (dx / s).round();
        dy -= s * (dy / s).round();
    }
    (dx, dy)
}

pub fn torus_distance(a: Point, b: Point, region: &Region) -> f64 {
    let (dx, dy) = displacement(a, b, region);
    dx.hypot(dy)
}

pub fn torus_distance_sq(a: Point, b: Point, region: &Region) -> f64 {
    let (dx, dy) = displacement(a, b, region);
    dx * dx + dy * dy
}

/// Wraps a point back into `[0, side)²` on a torus; open regions are left as is.
pub fn wrap(p: Point, region: &Region) -> Point {
    if region.boundary == Boundary::Open {
        return p;
    }
    let s = region.side;
    let w = |v: f64| {
        let m = v.rem_euclid(s);
        if m >= s {
            0.0
        } else {
            m
        }
    };
    Point::new(w(p.x), w(p.y))
}

/// One realization of transmitter/receiver pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipolarTopology {
    pub tx: Vec<Point>,
    pub rx: Vec<Point>,
    pub region: Region,
}

impl BipolarTopology {
    pub fn new(tx: Vec<Point>, rx: Vec<Point>, region: Region) -> Result<Self> {
        if tx.len() != rx.len() {
            return Err(AoiError::Config(format!(
                "{} transmitters but {} receivers",
                tx.len(),
                rx.len()
            )));
        }
        region.validate()?;
        Ok(Self { tx, rx, region })
    }

    /// A single link with its receiver at distance `r` along the x axis.
    pub fn single_link(r: f64, region: Region) -> Self {
        let c = region.side / 2.0;
        let tx = Point::new(c, c);
        let rx = wrap(Point::new(c + r, c), &region);
        Self {
            tx: vec![tx],
            rx: vec![rx],
            region,
        }
    }

    pub fn len(&self) -> usize {
        self.tx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tx.is_empty()
    }

    pub fn link_length(&self, i: usize) -> f64 {
        torus_distance(self.tx[i], self.rx[i], &self.region)
    }

    /// Distance from transmitter `j` to receiver `i`.
    pub fn cross_distance(&self, j: usize, i: usize) -> f64 {
        torus_distance(self.tx[j], self.rx[i], &self.region)
    }

    /// Applies a torus translation to every node.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let shift = |p: &Point| wrap(Point::new(p.x + dx, p.y + dy), &self.region);
        Self {
            tx: self.tx.iter().map(shift).collect(),
            rx: self.rx.iter().map(shift).collect(),
            region: self.region,
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| AoiError::io(path, e))?;
        writeln!(file, "{TOPOLOGY_SCHEMA}").map_err(|e| AoiError::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["id", "tx_x", "tx_y", "rx_x", "rx_y"])?;
        for (i, (t, r)) in self.tx.iter().zip(&self.rx).enumerate() {
            w.write_record(&[
                i.to_string(),
                format!("{:?}", t.x),
                format!("{:?}", t.y),
                format!("{:?}", r.x),
                format!("{:?}", r.y),
            ])?;
        }
        w.flush().map_err(|e| AoiError::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path, region: Region) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            id: usize,
            tx_x: f64,
            tx_y: f64,
            rx_x: f64,
            rx_y: f64,
        }
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(path)?;
        let mut tx = Vec::new();
        let mut rx = Vec::new();
        for (k, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row?;
            if row.id != k {
                return Err(AoiError::Schema {
                    path: path.to_path_buf(),
                    reason: format!("row {k} has id {}", row.id),
                });
            }
            tx.push(Point::new(row.tx_x, row.tx_y));
            rx.push(Point::new(row.rx_x, row.rx_y));
        }
        Self::new(tx, rx, region)
    }
}

/// Samples a Poisson bipolar topology with density `params.lambda` and link
/// distance `params.r`.
///
/// Stream 0 of the seed drives the count and transmitter positions, stream 1
/// the receiver angles, so the transmitter layout does not depend on how
/// receivers are drawn.
pub fn sample_bipolar(params: &SystemParams, region: &Region, seed: u64) -> BipolarTopology {
    let mut pos_rng: ChaCha8Rng = stream_rng(seed, 0);
    let mut ang_rng: ChaCha8Rng = stream_rng(seed, 1);
    let mean = params.lambda * region.area();
    let n = if mean > 0.0 {
        Poisson::new(mean).map(|d| d.sample(&mut pos_rng) as usize).unwrap_or(0)
    } else {
        0
    };
    let s = region.side;
    let tx: Vec<Point> = (0..n)
        .map(|_| Point::new(pos_rng.gen::<f64>() * s, pos_rng.gen::<f64>() * s))
        .collect();
    let rx = tx
        .iter()
        .map(|t| {
            let phi = ang_rng.gen::<f64>() * 2.0 * PI;
            wrap(
                Point::new(t.x + params.r * phi.cos(), t.y + params.r * phi.sin()),
                region,
            )
        })
        .collect();
    BipolarTopology {
        tx,
        rx,
        region: *region,
    }
}

/// Disk-shaped observation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingSet {
    pub center: Point,
    pub radius: f64,
}

impl StoppingSet {
    /// Disk of radius `radius` around the transmitter of link `i`.
    pub fn around_tx(topo: &BipolarTopology, i: usize, radius: f64) -> Self {
        Self {
            center: topo.tx[i],
            radius,
        }
    }

    /// Disk of radius `radius` around the receiver of link `i`.
    pub fn around_rx(topo: &BipolarTopology, i: usize, radius: f64) -> Self {
        Self {
            center: topo.rx[i],
            radius,
        }
    }

    pub fn contains(&self, p: Point, region: &Region) -> bool {
        torus_distance_sq(self.center, p, region) <= self.radius * self.radius
    }
}

/// Links `j ≠ own` whose receiver lies inside the window.
///
/// A zero radius selects nothing, even a receiver sitting exactly on the
/// center.
pub fn neighbors_in(window: &StoppingSet, topo: &BipolarTopology, own: usize) -> Vec<usize> {
    if window.radius <= 0.0 {
        return Vec::new();
    }
    (0..topo.len())
        .filter(|&j| j != own && window.contains(topo.rx[j], &topo.region))
        .collect()
}

/// Links `j ≠ own` whose transmitter lies inside the window.
pub fn transmitters_in(window: &StoppingSet, topo: &BipolarTopology, own: usize) -> Vec<usize> {
    if window.radius <= 0.0 {
        return Vec::new();
    }
    (0..topo.len())
        .filter(|&j| j != own && window.contains(topo.tx[j], &topo.region))
        .collect()
}

/// Uniform bucket grid for radius queries on a region.
#[derive(Debug, Clone)]
pub struct CellGrid {
    region: Region,
    cells_per_side: usize,
    cell: f64,
    buckets: Vec<Vec<u32>>,
    points: Vec<Point>,
}

impl CellGrid {
    pub fn new(points: &[Point], region: &Region, cell_size: f64) -> Self {
        let cells_per_side = ((region.side / cell_size.max(1e-9)).floor() as usize).clamp(1, 1024);
        let cell = region.side / cells_per_side as f64;
        let mut buckets = vec![Vec::new(); cells_per_side * cells_per_side];
        for (k, p) in points.iter().enumerate() {
            let (cx, cy) = Self::cell_of(*p, cell, cells_per_side);
            buckets[cy * cells_per_side + cx].push(k as u32);
        }
        Self {
            region: *region,
            cells_per_side,
            cell,
            buckets,
            points: points.to_vec(),
        }
    }

    fn cell_of(p: Point, cell: f64, n: usize) -> (usize, usize) {
        let c = |v: f64| ((v / cell).floor().max(0.0) as usize).min(n - 1);
        (c(p.x), c(p.y))
    }

    /// Calls `f(index, squared_distance)` for every point within `radius` of
    /// `center`.
    pub fn for_each_within<F: FnMut(usize, f64)>(&self, center: Point, radius: f64, mut f: F) {
        let n = self.cells_per_side as i64;
        let reach = (radius / self.cell).ceil() as i64;
        let r2 = radius * radius;
        let torus = self.region.boundary == Boundary::Torus;
        if 2 * reach + 1 >= n {
            for (k, p) in self.points.iter().enumerate() {
                let d2 = torus_distance_sq(center, *p, &self.region);
                if d2 <= r2 {
                    f(k, d2);
                }
            }
            return;
        }
        let (cx, cy) = Self::cell_of(center, self.cell, self.cells_per_side);
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let mut x = cx as i64 + dx;
                let mut y = cy as i64 + dy;
                if torus {
                    x = x.rem_euclid(n);
                    y = y.rem_euclid(n);
                } else if x < 0 || y < 0 || x >= n || y >= n {
                    continue;
                }
                for &k in &self.buckets[(y * n + x) as usize] {
                    let d2 = torus_distance_sq(center, self.points[k as usize], &self.region);
                    if d2 <= r2 {
                        f(k as usize, d2);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SystemParams {
        SystemParams::default()
    }

    #[test]
    fn wrap_across_boundary() {
        let reg = Region::torus(100.0);
        assert_eq!(torus_distance(Point::new(1.0, 0.0), Point::new(99.0, 0.0), &reg), 2.0);
        assert_eq!(torus_distance(Point::new(0.0, 0.0), Point::new(0.0, 0.0), &reg), 0.0);
        let open = Region::open(100.0);
        assert_eq!(torus_distance(Point::new(1.0, 0.0), Point::new(99.0, 0.0), &open), 98.0);
    }

    #[test]
    fn link_lengths_equal_r() {
        let reg = Region::torus(50.0);
        let topo = sample_bipolar(&params().with_lambda(0.05), &reg, 7);
        assert!(!topo.is_empty());
        for i in 0..topo.len() {
            assert!((topo.link_length(i) - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let reg = Region::torus(60.0);
        let a = sample_bipolar(&params(), &reg, 11);
        let b = sample_bipolar(&params(), &reg, 11);
        let c = sample_bipolar(&params(), &reg, 12);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn transmitters_do_not_depend_on_link_distance() {
        let reg = Region::torus(60.0);
        let a = sample_bipolar(&params().with_r(0.5), &reg, 3);
        let b = sample_bipolar(&params().with_r(2.0), &reg, 3);
        assert_eq!(a.tx, b.tx);
        assert_ne!(a.rx, b.rx);
    }

    #[test]
    fn zero_density_is_empty() {
        let topo = sample_bipolar(&params().with_lambda(0.0), &Region::default(), 1);
        assert!(topo.is_empty());
    }

    #[test]
    fn cell_grid_matches_brute_force() {
        let reg = Region::torus(80.0);
        let topo = sample_bipolar(&params().with_lambda(0.05), &reg, 9);
        let grid = CellGrid::new(&topo.rx, &reg, 6.0);
        for &radius in &[0.5, 6.0, 13.0, 70.0] {
            for i in (0..topo.len()).step_by(17) {
                let mut got = Vec::new();
                grid.for_each_within(topo.tx[i], radius, |k, _| got.push(k));
                got.sort_unstable();
                let want: Vec<usize> = (0..topo.len())
                    .filter(|&k| torus_distance(topo.tx[i], topo.rx[k], &reg) <= radius)
                    .collect();
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn neighbor_edge_cases() {
        let reg = Region::torus(40.0);
        let topo = sample_bipolar(&params().with_lambda(0.05), &reg, 5);
        let w0 = StoppingSet::around_tx(&topo, 0, 0.0);
        assert!(neighbors_in(&w0, &topo, 0).is_empty());
        let wall = StoppingSet::around_tx(&topo, 0, 40.0 * 2f64.sqrt() / 2.0 + 1e-9);
        assert_eq!(neighbors_in(&wall, &topo, 0).len(), topo.len() - 1);
    }
}
