//! Closed planar ellipses and an exact overlap predicate.
//!
//! Two ellipses written as quadratic forms `X^T A X <= 0`, `X^T B X <= 0`
//! (homogeneous coordinates) are disjoint exactly when the characteristic
//! cubic `det(λA + B)` has two distinct positive roots. All roots of that
//! cubic are real whenever the ellipses are disjoint, so the test reduces to
//! the sign of the discriminant plus a Descartes sign count.

/// Discriminant threshold below which a touching / degenerate configuration
/// is declared intersecting (closed grains).
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipse {
    pub center: [f64; 2],
    /// Semi-axis along `angle`.
    pub major: f64,
    pub minor: f64,
    /// Orientation of the major axis in radians.
    pub angle: f64,
}

type Mat3 = [[f64; 3]; 3];

impl Ellipse {
    pub fn new(center: [f64; 2], major: f64, minor: f64, angle: f64) -> Self {
        Ellipse {
            center,
            major,
            minor,
            angle,
        }
    }

    pub fn disk(center: [f64; 2], radius: f64) -> Self {
        Ellipse::new(center, radius, radius, 0.0)
    }

    /// Shape matrix `R diag(a^-2, b^-2) R^T`.
    fn shape(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.angle.sin_cos();
        let p = 1.0 / (self.major * self.major);
        let q = 1.0 / (self.minor * self.minor);
        [
            [c * c * p + s * s * q, c * s * (p - q)],
            [c * s * (p - q), s * s * p + c * c * q],
        ]
    }

    /// Normalised implicit value: negative inside, zero on the boundary.
    pub fn level(&self, p: [f64; 2]) -> f64 {
        let m = self.shape();
        let x = p[0] - self.center[0];
        let y = p[1] - self.center[1];
        m[0][0] * x * x + 2.0 * m[0][1] * x * y + m[1][1] * y * y - 1.0
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.level(p) <= 0.0
    }

    /// Boundary point at parameter `t`.
    pub fn boundary_point(&self, t: f64) -> [f64; 2] {
        let (s, c) = self.angle.sin_cos();
        let (st, ct) = t.sin_cos();
        let x = self.major * ct;
        let y = self.minor * st;
        [self.center[0] + c * x - s * y, self.center[1] + s * x + c * y]
    }

    /// Homogeneous matrix with the frame origin moved to `origin`.
    fn homogeneous(&self, origin: [f64; 2]) -> Mat3 {
        let m = self.shape();
        let c = [self.center[0] - origin[0], self.center[1] - origin[1]];
        let mc = [m[0][0] * c[0] + m[0][1] * c[1], m[1][0] * c[0] + m[1][1] * c[1]];
        let cmc = c[0] * mc[0] + c[1] * mc[1];
        [
            [m[0][0], m[0][1], -mc[0]],
            [m[1][0], m[1][1], -mc[1]],
            [-mc[0], -mc[1], cmc - 1.0],
        ]
    }
}

fn det3(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

fn adjugate(a: &Mat3) -> Mat3 {
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (i1, i2) = ((j + 1) % 3, (j + 2) % 3);
            let (j1, j2) = ((i + 1) % 3, (i + 2) % 3);
            r[i][j] = a[i1][j1] * a[i2][j2] - a[i1][j2] * a[i2][j1];
        }
    }
    r
}

fn trace_product(a: &Mat3, b: &Mat3) -> f64 {
    (0..3).map(|i| (0..3).map(|k| a[i][k] * b[k][i]).sum::<f64>()).sum()
}

/// Coefficients `[c3, c2, c1, c0]` of `det(λA + B)`.
pub(crate) fn characteristic_cubic(a: &Ellipse, b: &Ellipse) -> [f64; 4] {
    let origin = a.center;
    let ma = a.homogeneous(origin);
    let mb = b.homogeneous(origin);
    [
        det3(&ma),
        trace_product(&adjugate(&ma), &mb),
        trace_product(&ma, &adjugate(&mb)),
        det3(&mb),
    ]
}

/// Exact test on the characteristic cubic, without any bounding shortcuts.
pub fn separated_by_pencil(a: &Ellipse, b: &Ellipse) -> bool {
    let c = characteristic_cubic(a, b);
    let scale = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return false;
    }
    let [c3, c2, c1, c0] = c.map(|x| x / scale);
    let disc = 18.0 * c3 * c2 * c1 * c0 - 4.0 * c2.powi(3) * c0 + c2 * c2 * c1 * c1
        - 4.0 * c3 * c1.powi(3)
        - 27.0 * c3 * c3 * c0 * c0;
    if disc <= TIE_TOLERANCE {
        return false;
    }
    let signs: Vec<bool> = [c3, c2, c1, c0].iter().filter(|x| **x != 0.0).map(|x| *x > 0.0).collect();
    let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    changes == 2
}

/// True iff the two closed ellipses share at least one point.
pub fn ellipses_intersect(a: &Ellipse, b: &Ellipse) -> bool {
    let dx = a.center[0] - b.center[0];
    let dy = a.center[1] - b.center[1];
    let d2 = dx * dx + dy * dy;
    let outer = a.major.max(a.minor) + b.major.max(b.minor);
    if d2 > outer * outer {
        return false;
    }
    let inner = a.major.min(a.minor) + b.major.min(b.minor);
    if d2 <= inner * inner || a.contains(b.center) || b.contains(a.center) {
        return true;
    }
    !separated_by_pencil(a, b)
}
