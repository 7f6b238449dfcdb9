//! Low-level motion: steer toward the waypoint, follow an obstacle's contour
//! when the way ahead is blocked, and integrate unicycle kinematics against
//! the world geometry.

use std::f64::consts::{FRAC_PI_4, PI};

use super::agent::{AgentState, ContourState, NavMode};
use crate::world::{normalize_angle, Pose, Scan, WorldModel};

/// Unicycle command.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotionCommand {
    pub v: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavParams {
    pub d_safe: f64,
    pub tick_s: f64,
    pub heading_gain: f64,
    pub max_turn_rate: f64,
    pub wall_gain: f64,
    /// Give up circling after this many ticks.
    pub contour_timeout_ticks: u64,
}

impl NavParams {
    pub fn new(d_safe: f64, tick_s: f64) -> Self {
        Self {
            d_safe,
            tick_s,
            heading_gain: 3.0,
            max_turn_rate: 3.0,
            wall_gain: 8.0,
            contour_timeout_ticks: (15.0 / tick_s).round() as u64,
        }
    }
}

/// Stand-off kept from geometry when motion is cut short.
pub const CONTACT_MARGIN: f64 = 0.01;

fn relative(scan: &Scan, heading: f64) -> impl Iterator<Item = (f64, f64, bool)> + '_ {
    scan.beams
        .iter()
        .map(move |b| (normalize_angle(b.bearing - heading), b.range, b.hit))
}

/// Nearest hit within 45 degrees of the heading.
fn front_clearance(scan: &Scan, heading: f64) -> f64 {
    relative(scan, heading)
        .filter(|&(rel, _, hit)| hit && rel.abs() <= FRAC_PI_4 + 1e-9)
        .map(|(_, r, _)| r)
        .fold(f64::INFINITY, f64::min)
}

/// Nearest hit on one side, between 45 and 135 degrees off the heading.
fn side_clearance(scan: &Scan, heading: f64, left: bool) -> f64 {
    relative(scan, heading)
        .filter(|&(rel, _, hit)| {
            let rel = if left { rel } else { -rel };
            hit && rel >= FRAC_PI_4 - 1e-9 && rel <= 3.0 * FRAC_PI_4 + 1e-9
        })
        .map(|(_, r, _)| r)
        .fold(f64::INFINITY, f64::min)
}

/// Range of the beam pointing closest to `bearing`.
fn clearance_toward(scan: &Scan, bearing: f64) -> f64 {
    scan.beams
        .iter()
        .min_by(|a, b| {
            normalize_angle(a.bearing - bearing)
                .abs()
                .total_cmp(&normalize_angle(b.bearing - bearing).abs())
        })
        .map_or(f64::INFINITY, |b| if b.hit { b.range } else { f64::INFINITY })
}

fn go_to_goal(pose: &Pose, target: crate::Vec2, speed_limit: f64, p: &NavParams) -> MotionCommand {
    let delta = target - pose.position();
    let dist = delta.norm();
    if dist == 0.0 {
        return MotionCommand::default();
    }
    let err = normalize_angle(delta.y.atan2(delta.x) - pose.heading);
    let omega = (p.heading_gain * err).clamp(-p.max_turn_rate, p.max_turn_rate);
    let v = if err.abs() >= PI / 2.0 {
        0.0
    } else {
        (speed_limit * err.cos()).min(dist / p.tick_s)
    };
    MotionCommand { v, omega }
}

fn follow_contour(
    pose: &Pose,
    scan: &Scan,
    contour: &ContourState,
    speed_limit: f64,
    p: &NavParams,
) -> MotionCommand {
    let turn = if contour.turn_left { 1.0 } else { -1.0 };
    if front_clearance(scan, pose.heading) < 1.5 * p.d_safe {
        return MotionCommand {
            v: 0.0,
            omega: turn * p.max_turn_rate,
        };
    }
    // obstacle sits on the side opposite to the turn
    let side = side_clearance(scan, pose.heading, !contour.turn_left);
    if side.is_infinite() {
        // lost the wall: curve back toward it
        return MotionCommand {
            v: 0.5 * speed_limit,
            omega: -turn * 0.5 * p.max_turn_rate,
        };
    }
    let err = side - 1.5 * p.d_safe;
    MotionCommand {
        v: speed_limit,
        omega: (-turn * p.wall_gain * err).clamp(-p.max_turn_rate, p.max_turn_rate),
    }
}

/// Chooses this tick's command and updates the navigation mode.
pub fn navigate(agent: &mut AgentState, scan: &Scan, tick: u64, p: &NavParams) -> MotionCommand {
    let Some(waypoint) = agent.waypoint.filter(|_| agent.alive && agent.nav_mode != NavMode::Idle)
    else {
        return MotionCommand::default();
    };
    let pose = agent.estimated_pose;
    let dist = (waypoint - pose.position()).norm();

    if agent.nav_mode == NavMode::AvoidContour {
        let c = agent.contour.expect("contour state while avoiding");
        let expired = tick.saturating_sub(c.entry_tick) > p.contour_timeout_ticks;
        let retargeted = (waypoint - c.entry_waypoint).norm() > 0.5;
        let bearing = (waypoint - pose.position()).y.atan2((waypoint - pose.position()).x);
        let progressed = front_clearance(scan, pose.heading) >= p.d_safe
            && dist < c.entry_distance
            && clearance_toward(scan, bearing) > dist.min(2.0 * p.d_safe);
        if expired || retargeted || progressed {
            agent.nav_mode = NavMode::GoToGoal;
            agent.contour = None;
            agent.blocked = false;
        } else {
            return follow_contour(&pose, scan, &c, agent.speed_limit, p);
        }
    }

    let front = front_clearance(scan, pose.heading);
    if (front < p.d_safe && front < dist) || agent.blocked {
        let left = side_clearance(scan, pose.heading, true);
        let right = side_clearance(scan, pose.heading, false);
        let c = ContourState {
            turn_left: left >= right,
            entry_distance: dist,
            entry_waypoint: waypoint,
            entry_tick: tick,
        };
        agent.nav_mode = NavMode::AvoidContour;
        agent.contour = Some(c);
        agent.blocked = false;
        return follow_contour(&pose, scan, &c, agent.speed_limit, p);
    }
    go_to_goal(&pose, waypoint, agent.speed_limit, p)
}

/// Advances `pose` along the arc midpoint heading for one tick. The
/// translation stops short of the first contact with occupied space; the
/// flag reports whether that happened.
pub fn integrate_motion(world: &WorldModel, pose: &Pose, cmd: MotionCommand, dt: f64) -> (Pose, bool) {
    let mid = pose.heading + cmd.omega * dt / 2.0;
    let heading = pose.heading + cmd.omega * dt;
    let from = pose.position();
    let step = cmd.v * dt;
    if step <= 0.0 {
        return (Pose::new(from.x, from.y, heading), false);
    }
    let dir = crate::Vec2::new(mid.cos(), mid.sin());
    let to = from + dir * step;
    match world.first_contact(from, to) {
        None => (Pose::new(to.x, to.y, heading), false),
        Some(contact) => {
            let travel = (contact - CONTACT_MARGIN).max(0.0);
            let p = from + dir * travel;
            (Pose::new(p.x, p.y, heading), true)
        }
    }
}
