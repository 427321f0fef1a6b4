use std::fmt;
use std::str::FromStr;

use super::Tensor3;

/// Element-wise nonlinearity applied after a convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }

    /// Derivative evaluated at the pre-activation value `v`.
    #[inline]
    pub fn derivative(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = v.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    /// Tag byte used by the model file format.
    pub fn code(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Relu => 1,
            Activation::Identity => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        })
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(format!("unknown activation '{other}' (expected tanh, relu or identity)")),
        }
    }
}

pub fn apply_activation(input: &Tensor3, act: Activation) -> Tensor3 {
    match act {
        Activation::Identity => input.clone(),
        _ => input.map(|v| act.apply(v)),
    }
}

pub fn activation_derivative(input: &Tensor3, act: Activation) -> Tensor3 {
    input.map(|v| act.derivative(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_points() {
        assert_eq!(Activation::Tanh.apply(0.0), 0.0);
        assert_eq!(Activation::Tanh.derivative(0.0), 1.0);
        assert_eq!(Activation::Relu.apply(-3.0), 0.0);
        assert_eq!(Activation::Relu.derivative(-3.0), 0.0);
        assert_eq!(Activation::Relu.apply(2.5), 2.5);
        assert_eq!(Activation::Relu.derivative(2.5), 1.0);
    }

    #[test]
    fn tanh_derivative_matches_finite_differences() {
        let h = 1e-6;
        let xs = Tensor3::from_fn(4, 4, 1, |y, x, _| (y as f64 - 1.5) * 0.8 + x as f64 * 0.3);
        let plus = apply_activation(&xs.map(|v| v + h), Activation::Tanh);
        let minus = apply_activation(&xs.map(|v| v - h), Activation::Tanh);
        let analytic = activation_derivative(&xs, Activation::Tanh);
        for i in 0..xs.len() {
            let fd = (plus.data()[i] - minus.data()[i]) / (2.0 * h);
            assert!((fd - analytic.data()[i]).abs() < 1e-7, "index {i}: {fd} vs {}", analytic.data()[i]);
        }
    }

    #[test]
    fn identity_is_bit_exact() {
        let t = Tensor3::from_fn(3, 2, 2, |y, x, c| (y as f64).sin() * 1e300 + x as f64 - c as f64 * 1e-300);
        let out = apply_activation(&t, Activation::Identity);
        assert!(t
            .data()
            .iter()
            .zip(out.data())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn code_round_trip() {
        for act in [Activation::Tanh, Activation::Relu, Activation::Identity] {
            assert_eq!(Activation::from_code(act.code()), Some(act));
            assert_eq!(act.to_string().parse::<Activation>(), Ok(act));
        }
        assert_eq!(Activation::from_code(3), None);
    }
}
