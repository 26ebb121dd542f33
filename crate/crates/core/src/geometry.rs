//! Samplers for the spatial model: base stations, roads, and points on roads.
//!
//! All samplers are *nested*: for a fixed random stream, growing the window
//! radius only appends points, and growing the linear intensity of a Cox
//! process only adds points to each line. Paired-seed comparisons across
//! parameter values rely on this.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

/// Length of the independent sub-segments a Cox process is generated on, m.
pub const COX_BLOCK_M: f64 = 250.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        dx * dx + dy * dy
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn rotated(&self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

/// Road orientation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleMode {
    /// θ uniform on [0, π).
    #[default]
    Isotropic,
    /// θ ∈ {0, π/2} with equal probability.
    Manhattan,
}

impl AngleMode {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            AngleMode::Isotropic => rng.random::<f64>() * PI,
            AngleMode::Manhattan => {
                if rng.random_bool(0.5) {
                    0.0
                } else {
                    PI / 2.0
                }
            }
        }
    }
}

/// The line {p : ⟨p, n(θ)⟩ = r} with n(θ) = (−sin θ, cos θ).
///
/// `r` is signed, so |r| is the distance to the origin and θ ∈ [0, π) is the
/// angle with the x-axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Line {
    pub r: f64,
    pub theta: f64,
}

impl Line {
    pub fn new(r: f64, theta: f64) -> Self {
        Self { r, theta }
    }

    pub fn direction(&self) -> Point {
        let (s, c) = self.theta.sin_cos();
        Point::new(c, s)
    }

    pub fn normal(&self) -> Point {
        let (s, c) = self.theta.sin_cos();
        Point::new(-s, c)
    }

    /// Point at signed arc position `s` from the foot of the perpendicular.
    pub fn point_at(&self, s: f64) -> Point {
        let (d, n) = (self.direction(), self.normal());
        Point::new(self.r * n.x + s * d.x, self.r * n.y + s * d.y)
    }

    /// Unsigned distance from `p` to the line.
    pub fn distance_to(&self, p: &Point) -> f64 {
        let n = self.normal();
        (p.x * n.x + p.y * n.y - self.r).abs()
    }

    /// Half the chord length inside the disk of `radius` centered at the origin.
    pub fn half_chord(&self, radius: f64) -> f64 {
        if self.r.abs() >= radius {
            0.0
        } else {
            (radius * radius - self.r * self.r).sqrt()
        }
    }
}

/// A point of a Cox process together with the line carrying it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoxPoint {
    pub position: Point,
    /// Index into the slice of lines the point was sampled on.
    pub line: usize,
    /// Signed arc position along the line, measured from the foot of the perpendicular.
    pub offset: f64,
    /// Per-point seed for any independent marks (e.g. blockage draws).
    pub mark: u64,
}

/// One sampled geometry inside a disk.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ScenarioRealization {
    pub bs_points: Vec<Point>,
    pub lines: Vec<Line>,
    /// RISs on `lines`.
    pub ris_points: Vec<CoxPoint>,
    /// Road through the origin carrying the typical vehicle user, when present.
    pub typical_line: Option<Line>,
    /// RISs on the typical line (their `line` index is 0 and refers to it).
    pub typical_ris: Vec<CoxPoint>,
    pub window_radius: f64,
}

/// Homogeneous planar PPP generated in order of increasing distance to the origin.
pub struct RadialPpp<'a, R: ?Sized> {
    intensity: f64,
    acc: f64,
    rng: &'a mut R,
}

impl<'a, R: Rng + ?Sized> RadialPpp<'a, R> {
    pub fn new(intensity: f64, rng: &'a mut R) -> Self {
        Self { intensity, acc: 0.0, rng }
    }
}

impl<R: Rng + ?Sized> Iterator for RadialPpp<'_, R> {
    type Item = Point;

    fn next(&mut self) -> Option<Point> {
        if !(self.intensity > 0.0) {
            return None;
        }
        // Areas π·r_k² of successive points are arrival times of a rate-λ process.
        self.acc += self.rng.sample::<f64, _>(Exp1);
        let r = (self.acc / (self.intensity * PI)).sqrt();
        let phi = self.rng.random::<f64>() * 2.0 * PI;
        let (s, c) = phi.sin_cos();
        Some(Point::new(r * c, r * s))
    }
}

/// Poisson points of intensity `lambda` (per m²) in the disk of `radius`,
/// sorted by distance to the origin.
pub fn sample_bs<R: Rng + ?Sized>(lambda: f64, radius: f64, rng: &mut R) -> Vec<Point> {
    RadialPpp::new(lambda, rng)
        .take_while(|p| p.norm() <= radius)
        .collect()
}

/// Poisson lines hitting the disk of `radius`, `lambda_l` meters of road per m².
///
/// The line count is Poisson(2·λ_l·radius); lines come out sorted by |r|.
pub fn sample_lines<R: Rng + ?Sized>(
    lambda_l: f64,
    radius: f64,
    mode: AngleMode,
    rng: &mut R,
) -> Vec<Line> {
    let mut lines = Vec::new();
    if !(lambda_l > 0.0) {
        return lines;
    }
    let mut acc = 0.0;
    loop {
        acc += rng.sample::<f64, _>(Exp1) / (2.0 * lambda_l);
        if acc > radius {
            return lines;
        }
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let theta = mode.sample(rng);
        lines.push(Line::new(sign * acc, theta));
    }
}

/// A 1-D PPP of intensity `mu` (per m) on each line's chord inside the disk.
///
/// One seed per line is drawn from `rng` (so the output for a prefix of
/// `lines` does not depend on later lines). Each line is cut into blocks of
/// [`COX_BLOCK_M`] on both sides of its foot point, and every block draws from
/// its own substream.
pub fn sample_cox_on_lines<R: Rng + ?Sized>(
    lines: &[Line],
    mu: f64,
    window_radius: f64,
    rng: &mut R,
) -> Vec<CoxPoint> {
    let mut out = Vec::new();
    for (index, line) in lines.iter().enumerate() {
        let seed = rng.next_u64();
        if !(mu > 0.0) {
            continue;
        }
        let half = line.half_chord(window_radius);
        let blocks = (half / COX_BLOCK_M).ceil() as u64;
        for block in 0..blocks {
            for side in 0..2u64 {
                let mut block_rng = ChaCha8Rng::seed_from_u64(seed);
                block_rng.set_stream(2 * block + side);
                let sign = if side == 0 { 1.0 } else { -1.0 };
                let mut height = 0.0;
                loop {
                    height += block_rng.sample::<f64, _>(Exp1) / COX_BLOCK_M;
                    if height >= mu {
                        break;
                    }
                    let u: f64 = block_rng.random();
                    let mark = block_rng.next_u64();
                    let s = (block as f64 + u) * COX_BLOCK_M;
                    if s < half {
                        let offset = sign * s;
                        out.push(CoxPoint {
                            position: line.point_at(offset),
                            line: index,
                            offset,
                            mark,
                        });
                    }
                }
            }
        }
    }
    out
}

/// The road through the origin seen from a typical vehicle user: r = 0.
pub fn typical_line<R: Rng + ?Sized>(mode: AngleMode, rng: &mut R) -> Line {
    Line::new(0.0, mode.sample(rng))
}

/// A stationary snapshot (no typical user) of BSs, roads and RISs in a disk.
pub fn sample_scenario<R: Rng + ?Sized>(
    lambda_bs: f64,
    lambda_l: f64,
    mu: f64,
    radius: f64,
    mode: AngleMode,
    rng: &mut R,
) -> ScenarioRealization {
    let bs_points = sample_bs(lambda_bs, radius, rng);
    let lines = sample_lines(lambda_l, radius, mode, rng);
    let ris_points = sample_cox_on_lines(&lines, mu, radius, rng);
    ScenarioRealization {
        bs_points,
        lines,
        ris_points,
        typical_line: None,
        typical_ris: Vec::new(),
        window_radius: radius,
    }
}

/// Write points as CSV with header `kind,x_m,y_m,line_index`.
pub fn write_points_csv<W: Write>(
    mut w: W,
    kind: &str,
    points: impl IntoIterator<Item = (Point, Option<usize>)>,
) -> io::Result<()> {
    writeln!(w, "kind,x_m,y_m,line_index")?;
    for (p, line) in points {
        match line {
            Some(i) => writeln!(w, "{kind},{},{},{i}", p.x, p.y)?,
            None => writeln!(w, "{kind},{},{},", p.x, p.y)?,
        }
    }
    Ok(())
}

/// Write lines as CSV with header `kind,r_m,theta_rad`.
pub fn write_lines_csv<'a, W: Write>(
    mut w: W,
    kind: &str,
    lines: impl IntoIterator<Item = &'a Line>,
) -> io::Result<()> {
    writeln!(w, "kind,r_m,theta_rad")?;
    for l in lines {
        writeln!(w, "{kind},{},{}", l.r, l.theta)?;
    }
    Ok(())
}
