//! Numerical tolerances and pipeline thresholds.
//!
//! [`Tolerances`] holds the floating-point slack used by the geometry code.
//! [`Thresholds`] holds the dataset-construction and evaluation constants;
//! the defaults are the published values and every one can be overridden
//! from the command line.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Point-on-plane slack in millimetres.
    pub plane_eps: f64,
    /// Incidence check slack for transformed planes.
    pub incidence_eps: f64,
    /// Near clipping distance in millimetres.
    pub z_min: f64,
    /// Minimum length of a parameter interval along a 3D line.
    pub param_eps: f64,
    /// Junction merge radius and minimum segment length, in pixels.
    pub pixel_eps: f64,
    /// Junctions closer than this (mm) are merged at load time.
    pub junction_merge_eps: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            plane_eps: 1e-6,
            incidence_eps: 1e-9,
            z_min: 1e-6,
            param_eps: 1e-6,
            pixel_eps: 0.5,
            junction_merge_eps: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Scenes with any plane junction farther than this from its refit plane are dropped (mm).
    pub max_plane_residual_mm: f64,
    /// A door is closed when its closed ratio is strictly above this.
    pub door_closed_ratio: f64,
    /// Uniform samples drawn per door polygon.
    pub door_samples: usize,
    /// Endpoint-to-junction matching radius in the 128x128 frame.
    pub tau: f64,
    /// Line NMS radius; segments closer than `gamma^2` are suppressed.
    pub gamma: f64,
    /// sAP thresholds (squared pixels at 128x128).
    pub betas: Vec<f64>,
    /// jAP thresholds (pixels at 128x128).
    pub thetas: Vec<f64>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            max_plane_residual_mm: 1.0,
            door_closed_ratio: 0.3,
            door_samples: 100,
            tau: 10.0,
            gamma: 3.0,
            betas: vec![5.0, 10.0, 15.0],
            thetas: vec![0.5, 1.0, 2.0],
        }
    }
}

/// Side length of the square frame in which matching and metrics operate.
pub const EVAL_FRAME: f64 = 128.0;
