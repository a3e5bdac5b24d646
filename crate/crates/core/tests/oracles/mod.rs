//! Brute-force reference computations, written straight from the textbook
//! definitions and sharing no code with the library.

#![allow(dead_code)]

/// Symmetric 0/1 adjacency matrix of the undirected projection.
pub fn undirected(n: usize, directed: &[(usize, usize)]) -> Vec<Vec<u8>> {
    let mut a = vec![vec![0u8; n]; n];
    for &(u, v) in directed {
        if u != v {
            a[u][v] = 1;
            a[v][u] = 1;
        }
    }
    a
}

/// `Q = 1/2m Σ_ij (A_ij − k_i k_j / 2m) δ(c_i, c_j)`.
pub fn modularity(a: &[Vec<u8>], labels: &[usize]) -> Option<f64> {
    let n = a.len();
    let k: Vec<f64> = a.iter().map(|row| row.iter().map(|&x| x as f64).sum()).collect();
    let two_m: f64 = k.iter().sum();
    if two_m == 0.0 {
        return None;
    }
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                q += a[i][j] as f64 - k[i] * k[j] / two_m;
            }
        }
    }
    Some(q / two_m)
}

/// Every set partition of `0..n` as a restricted growth string.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let top = prefix.iter().max().map_or(0, |m| m + 1);
        for c in 0..=top {
            prefix.push(c);
            grow(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), n, &mut out);
    out
}

pub fn best_modularity(a: &[Vec<u8>]) -> Option<f64> {
    set_partitions(a.len()).iter().filter_map(|p| modularity(a, p)).reduce(f64::max)
}

/// Mean over nodes of triangles / possible pairs; degree < 2 gives 0.
pub fn clustering(a: &[Vec<u8>]) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        let deg: usize = a[i].iter().map(|&x| x as usize).sum();
        if deg < 2 {
            continue;
        }
        let mut links = 0usize;
        for j in 0..n {
            for k in j + 1..n {
                if a[i][j] == 1 && a[i][k] == 1 && a[j][k] == 1 {
                    links += 1;
                }
            }
        }
        total += links as f64 / (deg * (deg - 1) / 2) as f64;
    }
    total / n as f64
}

/// Floyd–Warshall; mean distance over ordered pairs of the largest
/// component (smallest member breaks size ties).
pub fn path_length(a: &[Vec<u8>]) -> Option<f64> {
    let n = a.len();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if a[i][j] == 1 {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    let mut best: Vec<usize> = Vec::new();
    for row in &d {
        let comp: Vec<usize> = (0..n).filter(|&j| row[j] < inf).collect();
        if comp.len() > best.len() {
            best = comp;
        }
    }
    if best.len() < 2 {
        return None;
    }
    let mut sum = 0usize;
    for &i in &best {
        for &j in &best {
            sum += d[i][j];
        }
    }
    let s = best.len() as f64;
    Some(sum as f64 / (s * (s - 1.0)))
}

pub fn density(n: usize, directed_edges: usize) -> Option<f64> {
    (n >= 2).then(|| directed_edges as f64 / (n * (n - 1)) as f64)
}

fn unit(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / norm).collect()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Per-point `(b − a) / max(a, b)` averaged; singletons and `a = b = 0` give 0.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let p: Vec<Vec<f64>> = points.iter().map(|v| unit(v)).collect();
    let k = labels.iter().max().unwrap() + 1;
    let mut total = 0.0;
    for i in 0..p.len() {
        let own: Vec<usize> = (0..p.len()).filter(|&j| j != i && labels[j] == labels[i]).collect();
        if own.is_empty() {
            continue;
        }
        let a = own.iter().map(|&j| dist(&p[i], &p[j])).sum::<f64>() / own.len() as f64;
        let mut b = f64::INFINITY;
        for c in (0..k).filter(|&c| c != labels[i]) {
            let other: Vec<usize> = (0..p.len()).filter(|&j| labels[j] == c).collect();
            let mean = other.iter().map(|&j| dist(&p[i], &p[j])).sum::<f64>() / other.len() as f64;
            b = b.min(mean);
        }
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    total / p.len() as f64
}

/// (mean over clusters of mean within-cluster pair distance,
///  mean pair distance between cluster means).
pub fn intra_inter(points: &[Vec<f64>], labels: &[usize]) -> (f64, f64) {
    let p: Vec<Vec<f64>> = points.iter().map(|v| unit(v)).collect();
    let k = labels.iter().max().unwrap() + 1;
    let dim = p[0].len();
    let mut intra = 0.0;
    let mut centroids = Vec::new();
    for c in 0..k {
        let members: Vec<&Vec<f64>> = p.iter().zip(labels).filter(|(_, &l)| l == c).map(|(v, _)| v).collect();
        let mut centroid = vec![0.0; dim];
        for v in &members {
            for d in 0..dim {
                centroid[d] += v[d] / members.len() as f64;
            }
        }
        centroids.push(centroid);
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for x in 0..members.len() {
            for y in x + 1..members.len() {
                sum += dist(members[x], members[y]);
                pairs += 1;
            }
        }
        if pairs > 0 {
            intra += sum / pairs as f64;
        }
    }
    let mut inter = 0.0;
    let mut pairs = 0usize;
    for x in 0..k {
        for y in x + 1..k {
            inter += dist(&centroids[x], &centroids[y]);
            pairs += 1;
        }
    }
    (intra / k as f64, inter / pairs as f64)
}

/// AVERAGE and STDEV.S as a spreadsheet defines them.
pub fn spreadsheet_mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}
