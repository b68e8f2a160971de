//! MSFW weights files.
//!
//! ```text
//! "MSFW" | version u16 = 1
//! | modality_set u8 | thermal dims u32 x 3 | optronic dims u32 x 3 | radar u32
//! | conv_filters u32 | kernel height u32 | kernel width u32 | dense_units u32
//! | dropout_rate f64
//! | 6 x (ndims u8 | dims u32 x ndims | values f32)
//! ```
//!
//! Tensors follow parameter order: conv kernels, conv bias, dense weights,
//! dense bias, output weights, output bias. Little-endian throughout.

use std::path::Path;

use uavfusion_core::{ModalitySet, Model, ModelSpec, ShapeProfile};

use crate::codec::{self, Reader};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MSFW";
pub const VERSION: u16 = 1;

pub fn encode_model(model: &Model<f32>) -> Result<Vec<u8>> {
    let spec = &model.spec;
    spec.validate()?;
    let mut out = Vec::with_capacity(64 + 4 * model.count_parameters());
    out.extend_from_slice(MAGIC);
    codec::put_u16(&mut out, VERSION);
    codec::put_u8(&mut out, spec.modality_set.count() as u8);
    for d in spec.profile.thermal.iter().chain(&spec.profile.optronic) {
        codec::put_u32_len(&mut out, *d, "profile dimension")?;
    }
    codec::put_u32_len(&mut out, spec.profile.radar, "radar width")?;
    codec::put_u32_len(&mut out, spec.conv_filters, "conv filters")?;
    codec::put_u32_len(&mut out, spec.kernel[0], "kernel height")?;
    codec::put_u32_len(&mut out, spec.kernel[1], "kernel width")?;
    codec::put_u32_len(&mut out, spec.dense_units, "dense units")?;
    codec::put_f64(&mut out, spec.dropout_rate);
    for p in model.params() {
        codec::put_dims(&mut out, p.shape())?;
        codec::put_f32s(&mut out, p.data());
    }
    Ok(out)
}

fn read_spec(r: &mut Reader<'_>) -> Result<ModelSpec> {
    let set_byte = r.u8("modality set")?;
    let modality_set = ModalitySet::from_count(set_byte as usize)
        .ok_or_else(|| Error::Format(format!("modality set byte {set_byte} is not 1, 2 or 3")))?;
    let mut dims = [0usize; 7];
    for d in &mut dims {
        *d = r.u32("shape profile")? as usize;
    }
    let profile = ShapeProfile {
        thermal: [dims[0], dims[1], dims[2]],
        optronic: [dims[3], dims[4], dims[5]],
        radar: dims[6],
    };
    let conv_filters = r.u32("conv filters")? as usize;
    let kernel = [
        r.u32("kernel height")? as usize,
        r.u32("kernel width")? as usize,
    ];
    let dense_units = r.u32("dense units")? as usize;
    let dropout_rate = r.f64("dropout rate")?;
    let spec = ModelSpec {
        modality_set,
        profile,
        conv_filters,
        kernel,
        dense_units,
        dropout_rate,
    };
    spec.validate()
        .map_err(|e| Error::Format(format!("invalid model spec: {e}")))?;
    Ok(spec)
}

pub fn decode_model(bytes: &[u8]) -> Result<Model<f32>> {
    let mut r = Reader::new(bytes);
    codec::expect_magic(&mut r, MAGIC, VERSION)?;
    let spec = read_spec(&mut r)?;
    let mut model = Model::<f32>::zeros(spec)?;
    for (k, p) in model.params_mut().into_iter().enumerate() {
        let what = format!("parameter tensor {k}");
        let dims = r.dims(&what)?;
        if dims != p.shape() {
            return Err(Error::Format(format!(
                "{what} has shape {dims:?}, the spec implies {:?}",
                p.shape()
            )));
        }
        *p = r.tensor(&dims, &what)?;
    }
    r.finish()?;
    Ok(model)
}

pub fn write_model(model: &Model<f32>, path: &Path) -> Result<u64> {
    let bytes = encode_model(model)?;
    codec::write_file(path, &bytes)?;
    Ok(bytes.len() as u64)
}

pub fn read_model(path: &Path) -> Result<Model<f32>> {
    decode_model(&codec::read_file(path)?).map_err(|e| e.in_file(path))
}
