use crate::geom::Vec3;

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: &Vec3, tol: f64) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] - tol && p[a] <= self.max[a] + tol)
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|a| self.min[a].is_finite() && self.max[a].is_finite() && self.min[a] < self.max[a])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    /// Box seen from inside: the sensor sits in the room and sees its faces.
    Room(Aabb),
    /// Solid box seen from outside.
    Solid(Aabb),
    /// Plane `normal . x + d = 0` clipped to `extent`.
    Plane { normal: Vec3, d: f64, extent: Aabb },
}

const HIT_EPS: f64 = 1e-9;

impl Surface {
    /// Distance along the unit direction `dir` to the first hit beyond a
    /// small epsilon.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        match self {
            Surface::Room(b) => {
                if !b.contains(origin, 0.0) {
                    return None;
                }
                let mut t_exit = f64::INFINITY;
                for a in 0..3 {
                    if dir[a] > 0.0 {
                        t_exit = t_exit.min((b.max[a] - origin[a]) / dir[a]);
                    } else if dir[a] < 0.0 {
                        t_exit = t_exit.min((b.min[a] - origin[a]) / dir[a]);
                    }
                }
                (t_exit > HIT_EPS && t_exit.is_finite()).then_some(t_exit)
            }
            Surface::Solid(b) => {
                let mut t_near = f64::NEG_INFINITY;
                let mut t_far = f64::INFINITY;
                for a in 0..3 {
                    if dir[a] == 0.0 {
                        if origin[a] < b.min[a] || origin[a] > b.max[a] {
                            return None;
                        }
                        continue;
                    }
                    let t1 = (b.min[a] - origin[a]) / dir[a];
                    let t2 = (b.max[a] - origin[a]) / dir[a];
                    t_near = t_near.max(t1.min(t2));
                    t_far = t_far.min(t1.max(t2));
                }
                (t_near <= t_far && t_near > HIT_EPS).then_some(t_near)
            }
            Surface::Plane { normal, d, extent } => {
                let denom = normal.dot(dir);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let t = -(normal.dot(origin) + d) / denom;
                if t <= HIT_EPS {
                    return None;
                }
                extent.contains(&(origin + dir * t), 1e-9).then_some(t)
            }
        }
    }
}

fn on_box_boundary(b: &Aabb, p: &Vec3, tol: f64) -> bool {
    b.contains(p, tol) && (0..3).any(|a| (p[a] - b.min[a]).abs() <= tol || (p[a] - b.max[a]).abs() <= tol)
}

impl Surface {
    /// True if `p` lies on the surface within `tol`.
    pub fn contains_point(&self, p: &Vec3, tol: f64) -> bool {
        match self {
            Surface::Room(b) | Surface::Solid(b) => on_box_boundary(b, p, tol),
            Surface::Plane { normal, d, extent } => (normal.dot(p) + d).abs() <= tol && extent.contains(p, tol),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub surfaces: Vec<Surface>,
    pub bounds: Aabb,
}

impl SceneSpec {
    pub fn new(surfaces: Vec<Surface>, bounds: Aabb) -> Result<Self, String> {
        let s = Self { surfaces, bounds };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.surfaces.is_empty() {
            return Err("scene has no surfaces".into());
        }
        if !self.bounds.is_valid() {
            return Err("scene bounds are not a valid box".into());
        }
        for s in &self.surfaces {
            let ok = match s {
                Surface::Room(b) | Surface::Solid(b) => b.is_valid(),
                Surface::Plane { normal, d, extent } => {
                    (normal.norm() - 1.0).abs() < 1e-9 && d.is_finite() && extent.is_valid()
                }
            };
            if !ok {
                return Err(format!("invalid surface {s:?}"));
            }
        }
        Ok(())
    }

    /// 10 m x 10 m x 3 m room with a central block, four pillars and a
    /// sloped panel.
    pub fn desk_room() -> Self {
        let room = Aabb::new(Vec3::new(-5.0, -5.0, 0.0), Vec3::new(5.0, 5.0, 3.0));
        let mut surfaces = vec![
            Surface::Room(room),
            Surface::Solid(Aabb::new(Vec3::new(-0.6, -0.4, 0.0), Vec3::new(0.6, 0.4, 1.2))),
        ];
        for (x, y) in [(4.0, 4.0), (-4.2, 3.8), (-3.9, -4.1), (4.1, -3.7)] {
            surfaces.push(Surface::Solid(Aabb::new(
                Vec3::new(x - 0.3, y - 0.3, 0.0),
                Vec3::new(x + 0.3, y + 0.3, 3.0),
            )));
        }
        let n = Vec3::new(1.0, 0.0, 1.0).normalize();
        surfaces.push(Surface::Plane {
            normal: n,
            d: -n.dot(&Vec3::new(-4.5, 0.0, 1.0)),
            extent: Aabb::new(Vec3::new(-5.0, -1.5, 0.5), Vec3::new(-4.0, 1.5, 1.5)),
        });
        Self { surfaces, bounds: room }
    }

    /// The unit cube `[0, 1]^3` seen from inside.
    pub fn unit_box() -> Self {
        let b = Aabb::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0));
        Self {
            surfaces: vec![Surface::Room(b)],
            bounds: b,
        }
    }

    pub fn on_surface(&self, p: &Vec3, tol: f64) -> bool {
        self.surfaces.iter().any(|s| s.contains_point(p, tol))
    }

    /// Nearest hit along the unit direction `dir`.
    pub fn raycast(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        self.surfaces
            .iter()
            .filter_map(|s| s.intersect(origin, dir))
            .min_by(|a, b| a.total_cmp(b))
    }
}

/// Points on three orthogonal walls `x=0`, `y=0`, `z=0` sampled on a grid
/// over `[gap, extent]`. A gap of at least one subvoxel keeps the walls out of
/// each other's subvoxels.
pub fn corner_points(step: f64, extent: f64, gap: f64) -> Vec<Vec3> {
    let n = ((extent - gap) / step).round() as usize;
    let mut out = Vec::with_capacity(3 * (n + 1) * (n + 1));
    for i in 0..=n {
        for j in 0..=n {
            let a = gap + i as f64 * step;
            let b = gap + j as f64 * step;
            out.push(Vec3::new(0.0, a, b));
            out.push(Vec3::new(a, 0.0, b));
            out.push(Vec3::new(a, b, 0.0));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn room_from_inside() {
        let s = SceneSpec::unit_box();
        let o = Vec3::new(0.5, 0.5, 0.5);
        assert_abs_diff_eq!(s.raycast(&o, &Vec3::x()).unwrap(), 0.5);
        let d = Vec3::new(1.0, 1.0, 0.0).normalize();
        assert_abs_diff_eq!(s.raycast(&o, &d).unwrap(), 0.5 * 2f64.sqrt(), epsilon = 1e-12);
        assert!(s.raycast(&Vec3::new(2.0, 0.5, 0.5), &Vec3::x()).is_none());
    }

    #[test]
    fn solid_from_outside() {
        let b = Surface::Solid(Aabb::new(Vec3::new(1.0, -1.0, -1.0), Vec3::new(2.0, 1.0, 1.0)));
        assert_abs_diff_eq!(b.intersect(&Vec3::zeros(), &Vec3::x()).unwrap(), 1.0);
        assert!(b.intersect(&Vec3::zeros(), &-Vec3::x()).is_none());
        assert!(b.intersect(&Vec3::zeros(), &Vec3::y()).is_none());
    }

    #[test]
    fn clipped_plane() {
        let p = Surface::Plane {
            normal: Vec3::z(),
            d: -1.0,
            extent: Aabb::new(Vec3::new(-1.0, -1.0, 0.5), Vec3::new(1.0, 1.0, 1.5)),
        };
        assert_abs_diff_eq!(p.intersect(&Vec3::zeros(), &Vec3::z()).unwrap(), 1.0);
        let slanted = Vec3::new(3.0, 0.0, 1.0).normalize();
        assert!(p.intersect(&Vec3::zeros(), &slanted).is_none());
    }

    #[test]
    fn desk_room_encloses_circle() {
        let s = SceneSpec::desk_room();
        s.validate().unwrap();
        for i in 0..64 {
            let a = i as f64 / 64.0 * std::f64::consts::TAU;
            let o = Vec3::new(3.0 * a.cos(), 3.0 * a.sin(), 1.5);
            for dir in [Vec3::x(), -Vec3::x(), Vec3::y(), -Vec3::y(), Vec3::z(), -Vec3::z()] {
                let t = s.raycast(&o, &dir).expect("closed room");
                assert!(t > 0.0 && t < 15.0);
            }
        }
    }

    #[test]
    fn validation() {
        assert!(SceneSpec::new(vec![], SceneSpec::unit_box().bounds).is_err());
        let bad = Surface::Solid(Aabb::new(Vec3::zeros(), Vec3::zeros()));
        assert!(SceneSpec::new(vec![bad], SceneSpec::unit_box().bounds).is_err());
    }

    #[test]
    fn corner_walls() {
        let pts = corner_points(0.5, 2.0, 0.5);
        assert_eq!(pts.len(), 3 * 16);
        assert!(pts.iter().all(|p| p.iter().filter(|c| **c == 0.0).count() == 1));
    }
}
