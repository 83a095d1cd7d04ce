use nalgebra::RealField;
use num_traits::FromPrimitive;

/// Scalar type the whole crate is generic over.
///
/// Everything numeric goes through this trait so the same code runs in
/// `f32` and `f64`. `of` is the conversion used for literal constants.
pub trait Real: RealField + FromPrimitive + Copy {

    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable in scalar type")
    }


    fn to_f64(self) -> f64;
}

impl Real for f64 {

    fn to_f64(self) -> f64 {
        self
    }
}

impl Real for f32 {

    fn to_f64(self) -> f64 {
        self as f64
    }
}
