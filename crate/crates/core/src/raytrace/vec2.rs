use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Meridional-plane vector: `z` along the optical axis, `x` transverse.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub z: f64,
    pub x: f64,
}

impl Vec2 {
    pub const AXIS: Vec2 = Vec2 { z: 1.0, x: 0.0 };

    pub const fn new(z: f64, x: f64) -> Self {
        Self { z, x }
    }

    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { z: c, x: s }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.z * o.z + self.x * o.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Self {
        self / self.norm()
    }

    /// Angle from +z toward +x.
    pub fn angle(self) -> f64 {
        self.x.atan2(self.z)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.z + o.z, self.x + o.x)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.z - o.z, self.x - o.x)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.z * s, self.x * s)
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.z / s, self.x / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.z, -self.x)
    }
}
