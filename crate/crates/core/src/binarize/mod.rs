//! Real-to-binary embedding converters.

mod heaviside;
mod thermometer;

pub use heaviside::{
    heaviside_backward, heaviside_forward, train_heaviside, HeavisideFit, HeavisideProjection,
};
pub use thermometer::{
    calibrate_range, read_codec, therm_decode, therm_encode, thermometer_level, write_codec,
    RangeCalibration, ThermometerCodec,
};
