// Shared by the stats oracle tests and the cli acceptance suite.

/// Normal-equations solve (X'X) b = X'y by Gauss-Jordan with partial
/// pivoting. Deliberately a different algorithm from the QR in the crate.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut m = vec![vec![0.0; p + 1]; p];
    for (row, yi) in x.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                m[i][j] += row[i] * row[j];
            }
            m[i][p] += row[i] * yi;
        }
    }
    for c in 0..p {
        let piv = (c..p).max_by(|a, b| m[*a][c].abs().total_cmp(&m[*b][c].abs())).unwrap();
        m.swap(c, piv);
        for r in 0..p {
            if r != c {
                let f = m[r][c] / m[c][c];
                for k in c..=p {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    (0..p).map(|i| m[i][p] / m[i][i]).collect()
}
