use super::MetricError;
use crate::raster::GrayImage;

/// Stand-in feature provider: mean and standard deviation of every cell of a
/// `cells × cells` partition, in raster order.
pub fn grid_statistics(image: &GrayImage, cells: usize) -> Result<Vec<f64>, MetricError> {
    let (w, h) = (image.width(), image.height());
    if cells == 0 || w < cells || h < cells {
        return Err(MetricError::ImageTooSmall { width: w, height: h, min: cells.max(1) });
    }
    let mut out = Vec::with_capacity(2 * cells * cells);
    for cy in 0..cells {
        for cx in 0..cells {
            let (x0, x1) = (cx * w / cells, (cx + 1) * w / cells);
            let (y0, y1) = (cy * h / cells, (cy + 1) * h / cells);
            let n = ((x1 - x0) * (y1 - y0)) as f64;
            let mut sum = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    sum += image.get(x, y);
                }
            }
            let mean = sum / n;
            let mut var = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    var += (image.get(x, y) - mean).powi(2);
                }
            }
            out.push(mean);
            out.push((var / n).sqrt());
        }
    }
    Ok(out)
}
