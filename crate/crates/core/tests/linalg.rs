use nalgebra::DVector;
use proptest::prelude::*;
use xtalk::linalg::{herm_eigs, kron, max_abs_eig, real_embed, CMatrix, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Eigenvalues of a real symmetric 3×3 matrix from the trigonometric
/// solution of its characteristic cubic.
fn sym3_eigs(a: [[f64; 3]; 3]) -> [f64; 3] {
    let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p < 1e-14 {
        return [q; 3];
    }
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = (a[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let mut e = [lo, 3.0 * q - hi - lo, hi];
    e.sort_by(f64::total_cmp);
    e
}

fn herm(n: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec(-1.0f64..1.0, 2 * n * n).prop_map(move |v| {
        let m = CMatrix::from_fn(n, |i, j| c(v[i * n + j], v[n * n + i * n + j]));
        CMatrix((&m.0 + m.0.adjoint()) * c(0.5, 0.0))
    })
}

fn cmat(n: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec(-1.0f64..1.0, 2 * n * n)
        .prop_map(move |v| CMatrix::from_fn(n, |i, j| c(v[i * n + j], v[n * n + i * n + j])))
}

fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
    (&a.0 - &b.0).iter().all(|z| z.norm() <= tol)
}

#[test]
fn symmetric_3x3_against_cubic_roots() {
    let cases = [
        [[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]],
        [[1.0, 0.5, 0.25], [0.5, -3.0, 0.1], [0.25, 0.1, 0.7]],
        [[4.0, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 4.0]],
    ];
    for a in cases {
        let m = CMatrix::from_real_rows(&[&a[0], &a[1], &a[2]]);
        let got = herm_eigs(&m).unwrap();
        let want = sym3_eigs(a);
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-10, "{got:?} vs {want:?}");
        }
    }
}

#[test]
fn hermitian_2x2_closed_form() {
    let (a, d, b) = (0.3, -0.8, c(0.4, -0.6));
    let m = CMatrix::from_fn(2, |i, j| match (i, j) {
        (0, 0) => c(a, 0.0),
        (1, 1) => c(d, 0.0),
        (0, 1) => b,
        _ => b.conj(),
    });
    let r = (((a - d) / 2.0).powi(2) + b.norm_sqr()).sqrt();
    let e = herm_eigs(&m).unwrap();
    assert!((e[0] - ((a + d) / 2.0 - r)).abs() < 1e-14);
    assert!((e[1] - ((a + d) / 2.0 + r)).abs() < 1e-14);
}

#[test]
fn non_hermitian_rejected() {
    let m = CMatrix::from_fn(2, |i, j| if i == 0 && j == 1 { c(1.0, 0.0) } else { c(0.0, 0.0) });
    assert!(herm_eigs(&m).is_err());
    assert!(real_embed(&m).is_err());
}

proptest! {
    #[test]
    fn kron_associative(a in cmat(2), b in cmat(2), d in cmat(2)) {
        let l = kron(&kron(&a, &b), &d);
        let r = kron(&a, &kron(&b, &d));
        prop_assert!(close(&l, &r, 1e-12));
    }

    #[test]
    fn kron_bilinear(a in cmat(2), a2 in cmat(2), b in cmat(3), s in -2.0f64..2.0) {
        let l = kron(&a.add(&a2.scale(s)), &b);
        let r = kron(&a, &b).add(&kron(&a2, &b).scale(s));
        prop_assert!(close(&l, &r, 1e-12));
    }

    #[test]
    fn kron_mixed_product(a in cmat(2), b in cmat(2), d in cmat(2), e in cmat(2)) {
        let l = kron(&a, &b).mul(&kron(&d, &e));
        let r = kron(&a.mul(&d), &b.mul(&e));
        prop_assert!(close(&l, &r, 1e-12));
    }

    #[test]
    fn eigenvalues_sum_to_trace(a in herm(4)) {
        let e = herm_eigs(&a).unwrap();
        prop_assert!((e.iter().sum::<f64>() - a.trace().re).abs() < 1e-10);
        prop_assert!(e.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn real_embedding_doubles_spectrum(a in herm(3), shift in -1.0f64..3.0) {
        let a = a.add(&CMatrix::identity(3).scale(shift));
        let e = herm_eigs(&a).unwrap();
        let r = real_embed(&a).unwrap();
        prop_assert!(r.is_symmetric());
        let re = r.eigenvalues();
        for k in 0..3 {
            prop_assert!((re[2 * k] - e[k]).abs() < 1e-9 && (re[2 * k + 1] - e[k]).abs() < 1e-9);
        }
        prop_assert_eq!(r.is_psd(), e[0] >= -1e-9);
    }

    #[test]
    fn projector_difference_norm(u in prop::collection::vec(-1.0f64..1.0, 4), v in prop::collection::vec(-1.0f64..1.0, 4)) {
        let ku = DVector::from_vec(vec![c(u[0], u[1]), c(u[2], u[3])]);
        let kv = DVector::from_vec(vec![c(v[0], v[1]), c(v[2], v[3])]);
        prop_assume!(ku.norm() > 0.1 && kv.norm() > 0.1);
        let (ku, kv) = (ku.normalize(), kv.normalize());
        let overlap = ku.dotc(&kv).norm_sqr();
        let d = CMatrix::outer(&ku).sub(&CMatrix::outer(&kv));
        prop_assert!((max_abs_eig(&d).unwrap() - (1.0 - overlap).max(0.0).sqrt()).abs() < 1e-9);
    }
}
