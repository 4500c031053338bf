//! Planar scenes, synthetic multipath channels, sensing-target selection and
//! angle-of-arrival computation.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
// Unused when std is in the dependency graph (its float methods take over).
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{derive_seed, uniform_phase, wrap_angle};
use crate::radio::{array_response, ArrayGeometry, ChannelVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSnapshot {
    pub time_index: u64,
    pub vehicle_positions: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub bs_position: Point,
    pub user_positions: Vec<Point>,
    pub snapshots: Vec<VehicleSnapshot>,
    pub rng_seed: u64,
}

impl Scene {
    pub fn new(
        bs_position: Point,
        user_positions: Vec<Point>,
        snapshots: Vec<VehicleSnapshot>,
        rng_seed: u64,
    ) -> Result<Self> {
        let scene = Scene {
            bs_position,
            user_positions,
            snapshots,
            rng_seed,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if self.user_positions.is_empty() {
            return Err(Error::Empty("user positions"));
        }
        if self
            .snapshots
            .windows(2)
            .any(|w| w[1].time_index <= w[0].time_index)
        {
            return Err(Error::InvalidArgument(
                "snapshot time indices must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Parameters of the synthetic geometric channel model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelModelParams {
    pub num_paths: usize,
    /// Half-width of the uniform spread of non-LOS path angles, radians.
    pub angle_spread: f64,
    /// Magnitude ratio between consecutive paths, in `(0, 1]`.
    pub gain_decay: f64,
    /// Angle added to every path, modelling a rotated array.
    pub rotation_offset: f64,
    pub rng_seed: u64,
}

impl Default for ChannelModelParams {
    fn default() -> Self {
        ChannelModelParams {
            num_paths: 5,
            angle_spread: 0.35,
            gain_decay: 0.5,
            rotation_offset: 0.0,
            rng_seed: 0,
        }
    }
}

impl ChannelModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_paths == 0 {
            return Err(Error::InvalidArgument("num_paths must be at least 1".into()));
        }
        if !(self.gain_decay > 0.0 && self.gain_decay <= 1.0) {
            return Err(Error::InvalidArgument("gain_decay must lie in (0, 1]".into()));
        }
        if !(self.angle_spread.is_finite() && self.rotation_offset.is_finite()) {
            return Err(Error::NonFinite("channel model angles"));
        }
        Ok(())
    }
}

/// `h = Σ_p α_p b_r(φ_p + offset)`: path 1 is the line-of-sight angle, later
/// paths scatter around it; `|α_p| = decay^{p-1}` with uniform random phase.
pub fn synth_channel(
    geom: &ArrayGeometry,
    params: &ChannelModelParams,
    user_pos: Point,
    bs_pos: Point,
) -> Result<ChannelVector> {
    params.validate()?;
    let los = target_aoa(bs_pos, user_pos)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut h = alloc::vec![Complex64::new(0.0, 0.0); geom.num_antennas()];
    let mut magnitude = 1.0;
    for p in 0..params.num_paths {
        let angle = if p == 0 {
            los
        } else {
            los + rng.random_range(-1.0..=1.0) * params.angle_spread
        };
        let alpha = Complex64::from_polar(magnitude, uniform_phase(&mut rng));
        for (hm, b) in h
            .iter_mut()
            .zip(array_response(geom, angle + params.rotation_offset))
        {
            *hm += alpha * b;
        }
        magnitude *= params.gain_decay;
    }
    ChannelVector::new(h)
}

/// One channel per user; the user index is mixed into the model seed.
pub fn synth_channels(
    geom: &ArrayGeometry,
    params: &ChannelModelParams,
    users: &[Point],
    bs_pos: Point,
) -> Result<Vec<ChannelVector>> {
    users
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let p = ChannelModelParams {
                rng_seed: derive_seed(params.rng_seed, i as u64),
                ..params.clone()
            };
            synth_channel(geom, &p, u, bs_pos)
        })
        .collect()
}

/// Quadrant-aware angle from the base station to a target, in `(-π, π]`.
pub fn target_aoa(bs_pos: Point, target_pos: Point) -> Result<f64> {
    let dx = target_pos.x - bs_pos.x;
    let dy = target_pos.y - bs_pos.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::CoincidentPositions);
    }
    Ok(wrap_angle(dy.atan2(dx)))
}

/// Index of the vehicle closest to any user; lowest index on ties.
pub fn nearest_vehicle(scene: &Scene, snapshot: &VehicleSnapshot) -> Result<usize> {
    if snapshot.vehicle_positions.is_empty() {
        return Err(Error::Empty("vehicle snapshot"));
    }
    let mut best = (0, f64::INFINITY);
    for (j, v) in snapshot.vehicle_positions.iter().enumerate() {
        let d = scene
            .user_positions
            .iter()
            .map(|u| u.distance(v))
            .fold(f64::INFINITY, f64::min);
        if d < best.1 {
            best = (j, d);
        }
    }
    Ok(best.0)
}

/// Layout of a generated street scene: a user grid beside a straight road that
/// vehicles drive along, sampled every `sample_period` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneParams {
    pub num_users: usize,
    pub num_vehicles: usize,
    pub num_snapshots: usize,
    pub bs_position: Point,
    /// Center of the user grid.
    pub grid_center: Point,
    pub grid_spacing: f64,
    /// The road runs parallel to the x axis at this y coordinate.
    pub road_y: f64,
    pub road_length: f64,
    pub vehicle_speed: f64,
    pub sample_period: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            num_users: 16,
            num_vehicles: 4,
            num_snapshots: 10,
            bs_position: Point::new(0.0, 0.0),
            grid_center: Point::new(40.0, 25.0),
            grid_spacing: 2.0,
            road_y: 12.0,
            road_length: 120.0,
            vehicle_speed: 12.0,
            sample_period: 0.1,
        }
    }
}

pub fn generate_scene(params: &SceneParams, seed: u64) -> Result<Scene> {
    if params.num_users == 0 {
        return Err(Error::InvalidArgument("at least one user is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = (params.num_users as f64).sqrt().ceil() as usize;
    let half = (side as f64 - 1.0) * params.grid_spacing / 2.0;
    let users = (0..params.num_users)
        .map(|i| {
            let (r, c) = (i / side, i % side);
            Point::new(
                params.grid_center.x - half + c as f64 * params.grid_spacing,
                params.grid_center.y - half + r as f64 * params.grid_spacing,
            )
        })
        .collect();
    let starts: Vec<(f64, f64)> = (0..params.num_vehicles)
        .map(|_| {
            let x0 = rng.random_range(0.0..params.road_length);
            let dir = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (x0, dir)
        })
        .collect();
    let snapshots = (0..params.num_snapshots)
        .map(|t| {
            let elapsed = t as f64 * params.sample_period;
            let vehicle_positions = starts
                .iter()
                .map(|&(x0, dir)| {
                    let x = positive_mod(
                        x0 + dir * params.vehicle_speed * elapsed,
                        params.road_length,
                    );
                    Point::new(x, params.road_y)
                })
                .collect();
            VehicleSnapshot {
                time_index: t as u64,
                vehicle_positions,
            }
        })
        .collect();
    let scene = Scene::new(params.bs_position, users, snapshots, seed)?;
    for u in &scene.user_positions {
        if u.distance(&scene.bs_position) == 0.0 {
            return Err(Error::CoincidentPositions);
        }
    }
    Ok(scene)
}

fn positive_mod(x: f64, m: f64) -> f64 {
    let r = x % m;
    if r < 0.0 {
        r + m
    } else {
        r
    }
}

/// Target angles for the first `count` snapshots: the vehicle closest to the
/// user grid in each snapshot.
pub fn sensing_targets(scene: &Scene, count: usize) -> Result<Vec<SensingTarget>> {
    if count == 0 {
        return Err(Error::InvalidArgument("need at least one sensing target".into()));
    }
    let usable: Vec<&VehicleSnapshot> = scene
        .snapshots
        .iter()
        .filter(|s| !s.vehicle_positions.is_empty())
        .collect();
    if usable.is_empty() {
        return Err(Error::Empty("vehicle snapshots"));
    }
    if usable.len() < count {
        return Err(Error::InvalidArgument(alloc::format!(
            "{count} sensing targets requested but only {} snapshots carry vehicles",
            usable.len()
        )));
    }
    usable
        .into_iter()
        .take(count)
        .map(|snap| {
            let vehicle = nearest_vehicle(scene, snap)?;
            let position = snap.vehicle_positions[vehicle];
            Ok(SensingTarget {
                time_index: snap.time_index,
                vehicle,
                position,
                aoa: target_aoa(scene.bs_position, position)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingTarget {
    pub time_index: u64,
    pub vehicle: usize,
    pub position: Point,
    pub aoa: f64,
}

/// Angle of `theta` as seen by a linear array: `θ` and `π − θ` produce the same
/// response, so both map to the representative in `[-π/2, π/2]`.
pub fn broadside_angle(theta: f64) -> f64 {
    let t = wrap_angle(theta);
    if t > PI / 2.0 {
        PI - t
    } else if t < -PI / 2.0 {
        -PI - t
    } else {
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn scene_with(users: Vec<Point>) -> Scene {
        Scene::new(Point::new(0.0, 0.0), users, vec![], 0).unwrap()
    }

    #[test]
    fn aoa_examples() {
        let o = Point::new(0.0, 0.0);
        assert_eq!(target_aoa(o, Point::new(0.0, 5.0)).unwrap(), FRAC_PI_2);
        assert!((target_aoa(o, Point::new(1.0, 1.0)).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert_eq!(target_aoa(o, Point::new(-1.0, 0.0)).unwrap(), PI);
        assert_eq!(target_aoa(o, Point::new(-1.0, -0.0)).unwrap(), PI);
        assert_eq!(target_aoa(o, o).unwrap_err(), Error::CoincidentPositions);
    }

    #[test]
    fn nearest_vehicle_examples() {
        let scene = scene_with(vec![Point::new(0.0, 0.0), Point::new(10.0, 0.0)]);
        let one = VehicleSnapshot {
            time_index: 0,
            vehicle_positions: vec![Point::new(50.0, 50.0)],
        };
        assert_eq!(nearest_vehicle(&scene, &one).unwrap(), 0);
        let two = VehicleSnapshot {
            time_index: 0,
            vehicle_positions: vec![Point::new(20.0, 0.0), Point::new(11.0, 0.0)],
        };
        assert_eq!(nearest_vehicle(&scene, &two).unwrap(), 1);
        let tie = VehicleSnapshot {
            time_index: 0,
            vehicle_positions: vec![Point::new(0.0, 3.0), Point::new(10.0, -3.0)],
        };
        assert_eq!(nearest_vehicle(&scene, &tie).unwrap(), 0);
        let empty = VehicleSnapshot {
            time_index: 0,
            vehicle_positions: vec![],
        };
        assert!(nearest_vehicle(&scene, &empty).is_err());
    }

    #[test]
    fn scene_rejects_bad_input() {
        assert!(Scene::new(Point::new(0.0, 0.0), vec![], vec![], 0).is_err());
        let snaps = vec![
            VehicleSnapshot {
                time_index: 2,
                vehicle_positions: vec![],
            },
            VehicleSnapshot {
                time_index: 2,
                vehicle_positions: vec![],
            },
        ];
        assert!(Scene::new(Point::new(0.0, 0.0), vec![Point::new(1.0, 1.0)], snaps, 0).is_err());
    }

    #[test]
    fn single_path_channel_is_scaled_steering_vector() {
        let geom = ArrayGeometry::half_wavelength(6, 0.1).unwrap();
        let params = ChannelModelParams {
            num_paths: 1,
            rng_seed: 11,
            ..Default::default()
        };
        let user = Point::new(3.0, 4.0);
        let h = synth_channel(&geom, &params, user, Point::new(0.0, 0.0)).unwrap();
        let b = array_response(&geom, 4f64.atan2(3.0));
        let alpha = h.entries()[0] / b[0];
        assert!((alpha.norm() - 1.0).abs() < 1e-12);
        for (x, y) in h.entries().iter().zip(&b) {
            assert!((x - alpha * y).norm() < 1e-12);
        }
    }

    #[test]
    fn channel_determinism_and_bound() {
        let geom = ArrayGeometry::half_wavelength(8, 0.1).unwrap();
        let params = ChannelModelParams {
            rng_seed: 4,
            ..Default::default()
        };
        let u = Point::new(10.0, -3.0);
        let bs = Point::new(0.0, 0.0);
        let a = synth_channel(&geom, &params, u, bs).unwrap();
        assert_eq!(a, synth_channel(&geom, &params, u, bs).unwrap());
        let other = ChannelModelParams {
            rng_seed: 5,
            ..params.clone()
        };
        assert_ne!(a, synth_channel(&geom, &other, u, bs).unwrap());
        let bound: f64 = (0..5).map(|p| 0.5f64.powi(p)).sum::<f64>() * 8f64.sqrt();
        assert!(a.norm() <= bound + 1e-12);
        assert!(synth_channel(&geom, &params, bs, bs).is_err());
    }

    #[test]
    fn generated_scene_is_valid() {
        let scene = generate_scene(&SceneParams::default(), 3).unwrap();
        assert_eq!(scene.user_positions.len(), 16);
        assert_eq!(scene.snapshots.len(), 10);
        assert_eq!(scene, generate_scene(&SceneParams::default(), 3).unwrap());
        let targets = sensing_targets(&scene, 2).unwrap();
        assert_eq!(targets.len(), 2);
        let bad = SceneParams {
            num_users: 0,
            ..Default::default()
        };
        assert!(generate_scene(&bad, 0).is_err());
    }

    #[test]
    fn broadside_folds_mirror() {
        assert!((broadside_angle(PI - 0.3) - 0.3).abs() < 1e-12);
        assert!((broadside_angle(-PI + 0.3) + 0.3).abs() < 1e-12);
        assert!((broadside_angle(0.2) - 0.2).abs() < 1e-12);
    }
}
