use crate::error::{Error, Result};

/// Distance (in samples) from every index to the nearest annotation.
///
/// Two linear sweeps: left-to-right carries the distance to the last
/// annotation seen, right-to-left folds in the next one.
pub fn distance_transform(annotations: &[usize], length: usize) -> Result<Vec<usize>> {
    if length == 0 {
        return Err(Error::validation("distance transform needs length > 0"));
    }
    if annotations.is_empty() {
        return Err(Error::Empty(
            "distance transform is undefined without annotations".into(),
        ));
    }
    let mut dist = vec![usize::MAX; length];
    for &a in annotations {
        if a >= length {
            return Err(Error::validation(format!(
                "annotation {a} outside length {length}"
            )));
        }
        dist[a] = 0;
    }

    for i in 1..length {
        if dist[i - 1] != usize::MAX {
            dist[i] = dist[i].min(dist[i - 1] + 1);
        }
    }
    for i in (0..length - 1).rev() {
        dist[i] = dist[i].min(dist[i + 1] + 1);
    }
    Ok(dist)
}

/// Float-valued transform, optionally capped at `clip`.
pub fn distance_transform_f64(
    annotations: &[usize],
    length: usize,
    clip: Option<f64>,
) -> Result<Vec<f64>> {
    let dt = distance_transform(annotations, length)?;
    Ok(dt
        .into_iter()
        .map(|d| {
            let d = d as f64;
            clip.map_or(d, |c| d.min(c))
        })
        .collect())
}
