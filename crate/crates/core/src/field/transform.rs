//! Exact squared Euclidean distance transform of sampled functions
//! (lower envelope of parabolas, one axis at a time).

/// 1-D transform: `out[q] = min_p (q - p)^2 + f[p]`.
///
/// `v` and `z` are scratch buffers of length at least `f.len()` and
/// `f.len() + 1`.
fn transform_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    // skip leading infinities so the first parabola is finite
    let Some(first) = f.iter().position(|x| x.is_finite()) else {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    };
    let mut k = 0usize;
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let qf = q as f64;
        loop {
            let p = v[k];
            let pf = p as f64;
            let s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates everywhere
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let d = qf - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared distance (in voxel units) from every voxel to the nearest seed.
///
/// `dims` are the grid dimensions with x varying fastest in `seeds`.
/// Voxels with no seed anywhere in the grid get `f64::INFINITY`.
pub fn squared_edt(dims: [usize; 3], seeds: &[bool]) -> Vec<f64> {
    let [nx, ny, nz] = dims;
    assert_eq!(seeds.len(), nx * ny * nz);
    let mut grid: Vec<f64> = seeds.iter().map(|&s| if s { 0.0 } else { f64::INFINITY }).collect();
    let nmax = nx.max(ny).max(nz);
    let mut line = vec![0.0; nmax];
    let mut out = vec![0.0; nmax];
    let mut v = vec![0usize; nmax];
    let mut z = vec![0.0; nmax + 1];

    let strides = [1, nx, nx * ny];
    for axis in 0..3 {
        let len = dims[axis];
        let stride = strides[axis];
        // iterate over every line parallel to `axis`
        let (o1, o2) = match axis {
            0 => ((ny, nx), (nz, nx * ny)),
            1 => ((nx, 1), (nz, nx * ny)),
            _ => ((nx, 1), (ny, nx)),
        };
        for b in 0..o2.0 {
            for a in 0..o1.0 {
                let base = a * o1.1 + b * o2.1;
                for i in 0..len {
                    line[i] = grid[base + i * stride];
                }
                transform_1d(&line[..len], &mut out[..len], &mut v, &mut z);
                for i in 0..len {
                    grid[base + i * stride] = out[i];
                }
            }
        }
    }
    grid
}
