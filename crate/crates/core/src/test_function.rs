use serde::{Deserialize, Serialize};

/// Continuous, bounded, non-negative test functions with support bounded on
/// the left.
///
/// `Ramp { a, lambda, mu }` is `mu * clamp(lambda * (x - a), 0, 1)`;
/// `Plateau` additionally multiplies by `clamp(lambda * (b - x), 0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Ramp { a: f64, lambda: f64, mu: f64 },
    Plateau { a: f64, b: f64, lambda: f64, mu: f64 },
}

impl TestFunction {
    pub fn ramp(a: f64, lambda: f64, mu: f64) -> Self {
        TestFunction::Ramp { a, lambda, mu }
    }

    pub fn plateau(a: f64, b: f64, lambda: f64, mu: f64) -> Self {
        TestFunction::Plateau { a, b, lambda, mu }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Ramp { a, lambda, mu } => mu * (lambda * (x - a)).clamp(0.0, 1.0),
            TestFunction::Plateau { a, b, lambda, mu } => {
                mu * (lambda * (x - a)).clamp(0.0, 1.0) * (lambda * (b - x)).clamp(0.0, 1.0)
            }
        }
    }

    pub fn left_edge(&self) -> f64 {
        match *self {
            TestFunction::Ramp { a, .. } | TestFunction::Plateau { a, .. } => a,
        }
    }

    /// Right end of the support (`+inf` for ramps).
    pub fn right_edge(&self) -> f64 {
        match *self {
            TestFunction::Ramp { .. } => f64::INFINITY,
            TestFunction::Plateau { b, .. } => b,
        }
    }

    pub fn height(&self) -> f64 {
        match *self {
            TestFunction::Ramp { mu, .. } | TestFunction::Plateau { mu, .. } => mu,
        }
    }

    /// The function `x -> self(x + y)`.
    pub fn shifted(&self, y: f64) -> Self {
        match *self {
            TestFunction::Ramp { a, lambda, mu } => TestFunction::Ramp { a: a - y, lambda, mu },
            TestFunction::Plateau { a, b, lambda, mu } => TestFunction::Plateau {
                a: a - y,
                b: b - y,
                lambda,
                mu,
            },
        }
    }

    pub fn with_height(&self, mu: f64) -> Self {
        match *self {
            TestFunction::Ramp { a, lambda, .. } => TestFunction::Ramp { a, lambda, mu },
            TestFunction::Plateau { a, b, lambda, .. } => TestFunction::Plateau { a, b, lambda, mu },
        }
    }

    /// Points where the function fails to be smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match *self {
            TestFunction::Ramp { a, lambda, .. } => vec![a, a + 1.0 / lambda],
            TestFunction::Plateau { a, b, lambda, .. } => {
                vec![a, a + 1.0 / lambda, b - 1.0 / lambda, b]
            }
        }
    }

    pub fn id(&self) -> String {
        match *self {
            TestFunction::Ramp { a, lambda, mu } => format!("ramp(a={a},lambda={lambda},mu={mu})"),
            TestFunction::Plateau { a, b, lambda, mu } => {
                format!("plateau(a={a},b={b},lambda={lambda},mu={mu})")
            }
        }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            TestFunction::Ramp { a, lambda, mu } => {
                a.is_finite() && lambda > 0.0 && lambda.is_finite() && mu >= 0.0 && mu.is_finite()
            }
            TestFunction::Plateau { a, b, lambda, mu } => {
                a.is_finite()
                    && b.is_finite()
                    && b > a
                    && lambda > 0.0
                    && lambda.is_finite()
                    && mu >= 0.0
                    && mu.is_finite()
            }
        }
    }
}

/// Nine functions with heights {0.5, 1, 2} and left edges spread over
/// [-1, 2], the bulk of the maximum of an SDPPP with `c S` of order one.
pub fn default_battery() -> Vec<TestFunction> {
    vec![
        TestFunction::ramp(-1.0, 1.0, 0.5),
        TestFunction::ramp(0.0, 1.0, 1.0),
        TestFunction::ramp(1.0, 1.0, 2.0),
        TestFunction::ramp(-1.0, 2.0, 2.0),
        TestFunction::ramp(2.0, 0.5, 1.0),
        TestFunction::plateau(-1.0, 1.0, 2.0, 1.0),
        TestFunction::plateau(0.0, 2.0, 2.0, 2.0),
        TestFunction::plateau(0.5, 3.0, 1.0, 0.5),
        TestFunction::plateau(-0.5, 0.5, 4.0, 2.0),
    ]
}
