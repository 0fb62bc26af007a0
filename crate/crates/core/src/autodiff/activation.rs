use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Elementwise activation functions and their derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Tanh,
    Relu,
    Sine,
    Sigmoid,
    Identity,
}

/// Highest derivative order with a closed form for tanh and sigmoid.
pub const MAX_DERIVATIVE_ORDER: u8 = 4;

impl Activation {
    pub const ALL: [Activation; 5] = [
        Activation::Tanh,
        Activation::Relu,
        Activation::Sine,
        Activation::Sigmoid,
        Activation::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Sine => "sine",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }

    pub fn supports_order(self, order: u8) -> bool {
        match self {
            Activation::Tanh | Activation::Sigmoid => order <= MAX_DERIVATIVE_ORDER,
            _ => true,
        }
    }

    /// `order`-th derivative at `x`; order 0 is the activation itself.
    pub fn eval(self, order: u8, x: f64) -> f64 {
        match self {
            Activation::Identity => match order {
                0 => x,
                1 => 1.0,
                _ => 0.0,
            },
            Activation::Relu => match order {
                0 => x.max(0.0),
                1 => {
                    if x > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                _ => 0.0,
            },
            Activation::Sine => match order % 4 {
                0 => x.sin(),
                1 => x.cos(),
                2 => -x.sin(),
                _ => -x.cos(),
            },
            Activation::Tanh => {
                let t = x.tanh();
                let s = 1.0 - t * t;
                match order {
                    0 => t,
                    1 => s,
                    2 => -2.0 * t * s,
                    3 => s * (6.0 * t * t - 2.0),
                    4 => s * (16.0 * t - 24.0 * t * t * t),
                    _ => f64::NAN,
                }
            }
            Activation::Sigmoid => {
                let s = if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                };
                let d = s * (1.0 - s);
                match order {
                    0 => s,
                    1 => d,
                    2 => d * (1.0 - 2.0 * s),
                    3 => d * (1.0 - 6.0 * s + 6.0 * s * s),
                    4 => d * (1.0 - 2.0 * s) * (1.0 - 12.0 * s + 12.0 * s * s),
                    _ => f64::NAN,
                }
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "sine" | "sin" => Ok(Activation::Sine),
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" | "linear" | "none" => Ok(Activation::Identity),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for act in [Activation::Tanh, Activation::Sine, Activation::Sigmoid] {
            for order in 0..MAX_DERIVATIVE_ORDER {
                for &x in &[-1.7, -0.3, 0.2, 1.1] {
                    let fd = (act.eval(order, x + h) - act.eval(order, x - h)) / (2.0 * h);
                    let exact = act.eval(order + 1, x);
                    assert!(
                        (fd - exact).abs() < 1e-7,
                        "{act} order {order} at {x}: {fd} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for act in Activation::ALL {
            assert_eq!(act.name().parse::<Activation>().unwrap(), act);
        }
        assert!("gelu".parse::<Activation>().is_err());
    }
}
