//! Hermite normal form of integer row lattices.

/// Row-style Hermite normal form of the lattice generated by `rows`:
/// nonzero rows with strictly increasing pivot columns, positive pivots, and
/// entries above each pivot reduced into `[0, pivot)`.
pub fn hermite_normal_form(rows: &[Vec<i64>], d: usize) -> Vec<Vec<i64>> {
    let mut m: Vec<Vec<i128>> = rows
        .iter()
        .filter(|r| r.iter().any(|&v| v != 0))
        .map(|r| r.iter().map(|&v| v as i128).collect())
        .collect();
    let mut basis: Vec<Vec<i128>> = Vec::new();
    for col in 0..d {
        // Euclid on column `col` among the remaining rows
        loop {
            let mut nz: Vec<usize> = (0..m.len()).filter(|&i| m[i][col] != 0).collect();
            if nz.len() <= 1 {
                break;
            }
            nz.sort_by_key(|&i| m[i][col].abs());
            let src = m[nz[0]].clone();
            for &i in &nz[1..] {
                let q = m[i][col] / src[col];
                for k in 0..d {
                    m[i][k] -= q * src[k];
                }
            }
        }
        if let Some(i) = (0..m.len()).find(|&i| m[i][col] != 0) {
            let mut row = m.swap_remove(i);
            if row[col] < 0 {
                row.iter_mut().for_each(|v| *v = -*v);
            }
            basis.push(row);
        }
        m.retain(|r| r.iter().any(|&v| v != 0));
    }
    // reduce entries above pivots
    for j in 0..basis.len() {
        let pc = (0..d).find(|&k| basis[j][k] != 0).unwrap();
        let piv = basis[j][pc];
        for i in 0..j {
            let q = basis[i][pc].div_euclid(piv);
            if q != 0 {
                let src = basis[j].clone();
                for k in 0..d {
                    basis[i][k] -= q * src[k];
                }
            }
        }
    }
    basis
        .into_iter()
        .map(|r| r.into_iter().map(|v| v as i64).collect())
        .collect()
}

/// Whether `v` is an integer combination of the rows of an HNF basis.
pub fn in_lattice(basis: &[Vec<i64>], v: &[i64]) -> bool {
    let mut r: Vec<i128> = v.iter().map(|&x| x as i128).collect();
    for row in basis {
        let pc = match row.iter().position(|&x| x != 0) {
            Some(p) => p,
            None => continue,
        };
        let piv = row[pc] as i128;
        if r[pc] % piv != 0 {
            return false;
        }
        let q = r[pc] / piv;
        for (x, &b) in r.iter_mut().zip(row) {
            *x -= q * b as i128;
        }
    }
    r.iter().all(|&x| x == 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_vectors_give_identity() {
        let b = hermite_normal_form(&[vec![0, 1], vec![1, 0], vec![1, 1]], 2);
        assert_eq!(b, vec![vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn multiples_collapse() {
        let b = hermite_normal_form(&[vec![2, 4], vec![-1, -2], vec![3, 6]], 2);
        assert_eq!(b, vec![vec![1, 2]]);
        assert!(in_lattice(&b, &[-5, -10]));
        assert!(!in_lattice(&b, &[1, 1]));
    }

    #[test]
    fn index_two_sublattice() {
        let b = hermite_normal_form(&[vec![1, 1], vec![1, -1]], 2);
        assert_eq!(b, vec![vec![1, 1], vec![0, 2]]);
        assert!(in_lattice(&b, &[2, 0]));
        assert!(!in_lattice(&b, &[1, 0]));
    }

    #[test]
    fn empty_and_zero_rows() {
        assert!(hermite_normal_form(&[], 3).is_empty());
        assert!(hermite_normal_form(&[vec![0, 0, 0]], 3).is_empty());
        assert!(in_lattice(&[], &[0, 0]));
    }
}
