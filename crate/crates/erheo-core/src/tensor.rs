//! Small fixed-size tensor algebra for pointwise constitutive evaluation.

/// 2-vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec2(pub [f64; 2]);

/// 2x2 tensor, row-major: `[a11, a12, a21, a22]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [f64; 4]);

/// The 2-D rotation generator J = [[0, 1], [-1, 0]]; `eps : w = w * J`.
pub const J: Mat2 = Mat2([0.0, 1.0, -1.0, 0.0]);

impl Vec2 {
    pub const ZERO: Vec2 = Vec2([0.0; 2]);

    pub fn dot(self, o: Vec2) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1]
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(self, t: f64) -> Vec2 {
        Vec2([self.0[0] * t, self.0[1] * t])
    }

    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2([self.0[0] + o.0[0], self.0[1] + o.0[1]])
    }

    pub fn sub(self, o: Vec2) -> Vec2 {
        Vec2([self.0[0] - o.0[0], self.0[1] - o.0[1]])
    }

    /// Outer product a (x) b.
    pub fn outer(self, o: Vec2) -> Mat2 {
        Mat2([
            self.0[0] * o.0[0],
            self.0[0] * o.0[1],
            self.0[1] * o.0[0],
            self.0[1] * o.0[1],
        ])
    }
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([0.0; 4]);
    pub const IDENTITY: Mat2 = Mat2([1.0, 0.0, 0.0, 1.0]);

    pub fn transpose(self) -> Mat2 {
        let [a, b, c, d] = self.0;
        Mat2([a, c, b, d])
    }

    pub fn sym(self) -> Mat2 {
        let [a, b, c, d] = self.0;
        Mat2([a, 0.5 * (b + c), 0.5 * (b + c), d])
    }

    pub fn skew(self) -> Mat2 {
        let [_, b, c, _] = self.0;
        Mat2([0.0, 0.5 * (b - c), 0.5 * (c - b), 0.0])
    }

    /// Frobenius norm.
    pub fn frob(self) -> f64 {
        self.ddot(self).sqrt()
    }

    /// Double contraction A : B.
    pub fn ddot(self, o: Mat2) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2] + self.0[3] * o.0[3]
    }

    pub fn matvec(self, v: Vec2) -> Vec2 {
        Vec2([
            self.0[0] * v.0[0] + self.0[1] * v.0[1],
            self.0[2] * v.0[0] + self.0[3] * v.0[1],
        ])
    }

    pub fn scale(self, t: f64) -> Mat2 {
        Mat2([self.0[0] * t, self.0[1] * t, self.0[2] * t, self.0[3] * t])
    }

    pub fn add(self, o: Mat2) -> Mat2 {
        Mat2([
            self.0[0] + o.0[0],
            self.0[1] + o.0[1],
            self.0[2] + o.0[2],
            self.0[3] + o.0[3],
        ])
    }

    pub fn sub(self, o: Mat2) -> Mat2 {
        Mat2([
            self.0[0] - o.0[0],
            self.0[1] - o.0[1],
            self.0[2] - o.0[2],
            self.0[3] - o.0[3],
        ])
    }
}
