//! Ground-truth environment: solid geometry, exact ray casting for the
//! simulated LiDAR, and removable walls.

use std::f64::consts::PI;

use thiserror::Error;

use crate::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("ray origin ({x:.4}, {y:.4}) lies inside occupied space")]
    OriginOccupied { x: f64, y: f64 },
    #[error("unknown wall id `{0}`")]
    UnknownWallId(String),
    #[error("invalid world geometry: {0}")]
    InvalidGeometry(String),
}

/// Wraps an angle into `[-pi, pi)`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r >= PI {
        r -= 2.0 * PI;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Radians in `[-pi, pi)`.
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beam {
    /// World-frame bearing.
    pub bearing: f64,
    pub range: f64,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub source_agent: u32,
    pub floor_id: u32,
    pub timestamp: u64,
    pub origin: Pose,
    pub max_range: f64,
    pub beams: Vec<Beam>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub range: f64,
    pub hit: bool,
}

/// Convex polygon, stored counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Vec2>,
}

impl ConvexPolygon {
    pub fn new(mut vertices: Vec<Vec2>) -> Result<Self, WorldError> {
        if vertices.len() < 3 {
            return Err(WorldError::InvalidGeometry(
                "polygon needs at least 3 vertices".into(),
            ));
        }
        let area2: f64 = (0..vertices.len())
            .map(|i| {
                let a = vertices[i];
                let b = vertices[(i + 1) % vertices.len()];
                a.x * b.y - b.x * a.y
            })
            .sum();
        if area2.abs() < 1e-12 {
            return Err(WorldError::InvalidGeometry("degenerate polygon".into()));
        }
        if area2 < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if cross(b - a, c - b) < -1e-12 {
                return Err(WorldError::InvalidGeometry("polygon is not convex".into()));
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n)
            .map(|i| cross(self.vertices[i], self.vertices[(i + 1) % n]))
            .sum::<f64>()
    }

    pub fn centroid(&self) -> Vec2 {
        self.vertices.iter().sum::<Vec2>() / self.vertices.len() as f64
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            cross(b - a, p - a) >= 0.0
        })
    }

    /// Smallest `t >= 0` with `origin + t * dir` inside the closed polygon.
    fn ray_entry(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        let n = self.vertices.len();
        let mut t_enter = 0.0_f64;
        let mut t_exit = f64::INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let edge = b - a;
            // outward normal of a CCW edge
            let normal = Vec2::new(edge.y, -edge.x);
            let num = normal.dot(&(origin - a));
            let den = normal.dot(&dir);
            if den == 0.0 {
                if num > 0.0 {
                    return None;
                }
            } else {
                let t = -num / den;
                if den < 0.0 {
                    t_enter = t_enter.max(t);
                } else {
                    t_exit = t_exit.min(t);
                }
            }
            if t_enter > t_exit {
                return None;
            }
        }
        Some(t_enter)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wall {
    pub id: String,
    pub start: Vec2,
    pub end: Vec2,
    pub thickness: f64,
    pub present: bool,
}

impl Wall {
    /// Inside the segment dilated by half the thickness (a capsule).
    pub fn contains(&self, p: Vec2) -> bool {
        distance_to_segment(p, self.start, self.end) <= self.thickness / 2.0
    }

    fn ray_entry(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        let r = self.thickness / 2.0;
        let mut best = circle_entry(origin, dir, self.start, r);
        best = min_opt(best, circle_entry(origin, dir, self.end, r));
        let axis = self.end - self.start;
        let len = axis.norm();
        if len > 0.0 {
            let u = axis / len;
            let n = Vec2::new(-u.y, u.x) * r;
            if let Ok(rect) = ConvexPolygon::new(vec![
                self.start + n,
                self.end + n,
                self.end - n,
                self.start - n,
            ]) {
                best = min_opt(best, rect.ray_entry(origin, dir));
            }
        }
        best
    }
}

fn min_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

pub fn distance_to_segment(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Entry parameter of a unit-direction ray into a closed disk.
fn circle_entry(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let b = oc.dot(&dir);
    let c = oc.norm_squared() - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t >= 0.0).then_some(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    pub floor_id: u32,
    pub width: f64,
    pub height: f64,
    pub obstacles: Vec<ConvexPolygon>,
    pub walls: Vec<Wall>,
}

impl WorldModel {
    pub fn new(
        floor_id: u32,
        width: f64,
        height: f64,
        obstacles: Vec<ConvexPolygon>,
        walls: Vec<Wall>,
    ) -> Result<Self, WorldError> {
        if !(width > 0.0 && height > 0.0) || !width.is_finite() || !height.is_finite() {
            return Err(WorldError::InvalidGeometry(format!(
                "extent must be strictly positive, got {width} x {height}"
            )));
        }
        let world = Self {
            floor_id,
            width,
            height,
            obstacles,
            walls,
        };
        let inside = |p: &Vec2| p.x >= 0.0 && p.y >= 0.0 && p.x <= width && p.y <= height;
        for poly in &world.obstacles {
            if !poly.vertices().iter().all(inside) {
                return Err(WorldError::InvalidGeometry(
                    "obstacle vertex outside extent".into(),
                ));
            }
        }
        for (i, wall) in world.walls.iter().enumerate() {
            if !inside(&wall.start) || !inside(&wall.end) {
                return Err(WorldError::InvalidGeometry(format!(
                    "wall `{}` endpoint outside extent",
                    wall.id
                )));
            }
            if !(wall.thickness > 0.0) {
                return Err(WorldError::InvalidGeometry(format!(
                    "wall `{}` thickness must be positive",
                    wall.id
                )));
            }
            if world.walls[..i].iter().any(|w| w.id == wall.id) {
                return Err(WorldError::InvalidGeometry(format!(
                    "duplicate wall id `{}`",
                    wall.id
                )));
            }
        }
        Ok(world)
    }

    /// An empty rectangular pen.
    pub fn open(floor_id: u32, width: f64, height: f64) -> Result<Self, WorldError> {
        Self::new(floor_id, width, height, Vec::new(), Vec::new())
    }

    pub fn is_occupied(&self, p: Vec2) -> bool {
        if !(p.x > 0.0 && p.y > 0.0 && p.x < self.width && p.y < self.height) {
            return true;
        }
        self.obstacles.iter().any(|o| o.contains(p))
            || self.walls.iter().any(|w| w.present && w.contains(p))
    }

    pub fn cast_ray(
        &self,
        origin: Vec2,
        bearing: f64,
        max_range: f64,
    ) -> Result<RayHit, WorldError> {
        if self.is_occupied(origin) {
            return Err(WorldError::OriginOccupied {
                x: origin.x,
                y: origin.y,
            });
        }
        let dir = Vec2::new(bearing.cos(), bearing.sin());
        let mut nearest = self.boundary_exit(origin, dir);
        for poly in &self.obstacles {
            if let Some(t) = poly.ray_entry(origin, dir) {
                nearest = nearest.min(t);
            }
        }
        for wall in self.walls.iter().filter(|w| w.present) {
            if let Some(t) = wall.ray_entry(origin, dir) {
                nearest = nearest.min(t);
            }
        }
        Ok(if nearest < max_range {
            RayHit {
                range: nearest,
                hit: true,
            }
        } else {
            RayHit {
                range: max_range,
                hit: false,
            }
        })
    }

    fn boundary_exit(&self, origin: Vec2, dir: Vec2) -> f64 {
        let mut t = f64::INFINITY;
        if dir.x > 0.0 {
            t = t.min((self.width - origin.x) / dir.x);
        } else if dir.x < 0.0 {
            t = t.min(-origin.x / dir.x);
        }
        if dir.y > 0.0 {
            t = t.min((self.height - origin.y) / dir.y);
        } else if dir.y < 0.0 {
            t = t.min(-origin.y / dir.y);
        }
        t
    }

    /// Beams are spread evenly over the full circle starting at the pose heading.
    /// The caller fills in `source_agent`, `floor_id` and `timestamp`.
    pub fn cast_scan(
        &self,
        pose: &Pose,
        beam_count: usize,
        max_range: f64,
    ) -> Result<Scan, WorldError> {
        let origin = pose.position();
        if self.is_occupied(origin) {
            return Err(WorldError::OriginOccupied {
                x: origin.x,
                y: origin.y,
            });
        }
        let step = 2.0 * PI / beam_count as f64;
        let beams = (0..beam_count)
            .map(|k| {
                let bearing = normalize_angle(pose.heading + k as f64 * step);
                let r = self.cast_ray(origin, bearing, max_range)?;
                Ok(Beam {
                    bearing,
                    range: r.range,
                    hit: r.hit,
                })
            })
            .collect::<Result<Vec<_>, WorldError>>()?;
        Ok(Scan {
            source_agent: 0,
            floor_id: self.floor_id,
            timestamp: 0,
            origin: *pose,
            max_range,
            beams,
        })
    }

    /// Marks the wall as removed. Idempotent.
    pub fn apply_topology_event(&mut self, wall_id: &str) -> Result<(), WorldError> {
        let wall = self
            .walls
            .iter_mut()
            .find(|w| w.id == wall_id)
            .ok_or_else(|| WorldError::UnknownWallId(wall_id.to_string()))?;
        wall.present = false;
        Ok(())
    }

    pub fn has_wall(&self, wall_id: &str) -> bool {
        self.walls.iter().any(|w| w.id == wall_id)
    }

    /// Distance the straight segment `from -> to` can be travelled before
    /// touching occupied space, or `None` when the whole segment is clear.
    pub fn first_contact(&self, from: Vec2, to: Vec2) -> Option<f64> {
        let delta = to - from;
        let len = delta.norm();
        if len == 0.0 {
            return None;
        }
        let bearing = delta.y.atan2(delta.x);
        match self.cast_ray(from, bearing, len) {
            Ok(RayHit { hit: true, range }) => Some(range),
            Ok(_) => None,
            Err(_) => Some(0.0),
        }
    }
}
