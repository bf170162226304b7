//! File formats: `OGNT` tensors and the JSON documents.

pub mod json;
pub mod tensor;

use ndarray::{Array3, Array4, Axis, Ix3, Ix4};

use crate::encoding::{HeatmapSet, OffsetSet};
use crate::error::{Error, Result};

pub use json::{read_json, write_json, BoxDocument, MetricReport, PoseDocument};
pub use tensor::{read_tensor, write_tensor, TensorError};

/// Heatmaps are stored as a `K x H x W` tensor.
pub fn heatmap_from_tensor(t: ndarray::ArrayD<f32>) -> Result<HeatmapSet> {
    let data = t
        .into_dimensionality::<Ix3>()
        .map_err(|e| Error::Schema(format!("heatmap tensor must be rank 3: {e}")))?;
    Ok(HeatmapSet { data })
}

/// Offsets are stored as one `2 x K x H x W` tensor, `dx` first.
pub fn offsets_to_tensor(o: &OffsetSet) -> Result<Array4<f32>> {
    ndarray::stack(Axis(0), &[o.dx.view(), o.dy.view()]).map_err(|e| Error::invalid(format!("offset shapes differ: {e}")))
}

pub fn offsets_from_tensor(t: ndarray::ArrayD<f32>) -> Result<OffsetSet> {
    let t = t
        .into_dimensionality::<Ix4>()
        .map_err(|e| Error::Schema(format!("offset tensor must be rank 4: {e}")))?;
    if t.shape()[0] != 2 {
        return Err(Error::Schema(format!("offset tensor leading dim must be 2, got {}", t.shape()[0])));
    }
    let dx: Array3<f32> = t.index_axis(Axis(0), 0).to_owned();
    let dy: Array3<f32> = t.index_axis(Axis(0), 1).to_owned();
    Ok(OffsetSet { dx, dy })
}
