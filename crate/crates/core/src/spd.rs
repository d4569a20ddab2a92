//! Elementwise elimination of the discontinuous pressure, giving the SPD
//! operator `Ā = Σ_K (μ_K A_K + λ_K B_Kᵀ C_K⁻¹ B_K)`.

use crate::assembly::{scatter, DofMap, SaddleSystem};
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, DenseFactorization, DenseMatrix};
use crate::mesh::{CartesianMesh, SubdomainLayout};

#[derive(Clone, Debug)]
pub struct SpdOperator {
    pub matrix: CsrMatrix,
    /// `C_K⁻¹ B_K`, shared by all (congruent) elements.
    pub cinv_b: DenseMatrix,
    /// `λ_K` per element.
    pub lambdas: Vec<f64>,
    pub dofmap: DofMap,
    pub rhs: Vec<f64>,
    pub mesh: CartesianMesh,
    pub layout: SubdomainLayout,
}

impl SpdOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

pub fn eliminate_pressure(system: &SaddleSystem) -> Result<SpdOperator> {
    let mut lambdas = Vec::with_capacity(system.dofmap.num_elements);
    for e in 0..system.dofmap.num_elements {
        match system.element_material(e).lambda.finite() {
            Some(l) => lambdas.push(l),
            None => {
                return Err(Error::IncompressibleReformulation {
                    subdomain: system.layout.subdomain_of_element(&system.mesh, e),
                })
            }
        }
    }
    let el = &system.element;
    let cf = DenseFactorization::factorize_dense(el.c.clone())?;
    let np = el.c.nrows();
    let nd = el.b.ncols();
    let cinv_b = DenseMatrix::from_columns(np, nd, |j, col| {
        for i in 0..np {
            col[i] = el.b[(i, j)];
        }
        cf.solve_in_place(col);
    });
    let penalty = el.b.transpose().matmul(&cinv_b);

    let mut matrix = system.a.scaled(0.0);
    for (e, &lam) in lambdas.iter().enumerate() {
        let mu = system.element_material(e).mu;
        let ud = system.dofmap.element_displacement_dofs(e);
        scatter(&mut matrix, &ud, &ud, &el.a, mu);
        if lam != 0.0 {
            scatter(&mut matrix, &ud, &ud, &penalty, lam);
        }
    }
    Ok(SpdOperator {
        matrix,
        cinv_b,
        lambdas,
        dofmap: system.dofmap.clone(),
        rhs: system.rhs.clone(),
        mesh: system.mesh.clone(),
        layout: system.layout.clone(),
    })
}

/// `p_K = λ_K C_K⁻¹ B_K u_K` on every element.
pub fn recover_pressure(op: &SpdOperator, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: u.len(),
        });
    }
    let np = op.cinv_b.nrows();
    let mut p = vec![0.0; op.dofmap.num_pressure()];
    for (e, &lam) in op.lambdas.iter().enumerate() {
        let ue: Vec<f64> = op
            .dofmap
            .element_displacement_dofs(e)
            .iter()
            .map(|d| d.map_or(0.0, |d| u[d]))
            .collect();
        let pe = op.cinv_b.matvec(&ue);
        for j in 0..np {
            p[e * np + j] = lam * pe[j];
        }
    }
    Ok(p)
}

pub fn apply_spd(op: &SpdOperator, x: &[f64]) -> Result<Vec<f64>> {
    op.matrix.spmv(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_saddle, CoefficientField, Lambda, Material, RhsSpec};
    use crate::elements::{reference_basis, Discretization};
    use crate::linalg::spectrum::symmetric_eigenvalues;
    use crate::linalg::{norm2, DirectSolver};
    use crate::mesh::build_mesh;
    use proptest::prelude::*;

    fn system(kind: Discretization, ns: usize, m: usize, coeffs: CoefficientField) -> SaddleSystem {
        let (mesh, layout) = build_mesh(ns, ns, m).unwrap();
        let basis = reference_basis(kind).unwrap();
        assemble_saddle(&mesh, &layout, &basis, &coeffs, RhsSpec::Random { seed: 11 }).unwrap()
    }

    #[test]
    fn zero_lambda_gives_mu_a() {
        let c = CoefficientField::uniform(2, 2, Material { mu: 3.0, lambda: Lambda::Finite(0.0) });
        let s = system(Discretization::FemQ2P1, 2, 2, c);
        let op = eliminate_pressure(&s).unwrap();
        assert!(op.matrix.add(-1.0, &s.a).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn incompressible_rejected() {
        let c = CoefficientField::constant(2, 2, 1.0, 0.5).unwrap();
        let s = system(Discretization::FemQ2P1, 2, 2, c);
        assert!(matches!(
            eliminate_pressure(&s),
            Err(Error::IncompressibleReformulation { .. })
        ));
    }

    #[test]
    fn single_element_matches_block_algebra() {
        for kind in [Discretization::FemQ2P1, Discretization::Sem(4)] {
            let c = CoefficientField::constant(1, 1, 2.0, 0.45).unwrap();
            let s = system(kind, 1, 1, c.clone());
            let op = eliminate_pressure(&s).unwrap();
            let m = c.material(0);
            let lam = m.lambda.finite().unwrap();
            // Explicit dense μA + λ Bᵀ C⁻¹ B from assembled global blocks.
            let cinv = DenseFactorization::factorize(&s.c.scaled(lam), true).unwrap();
            let b = DenseMatrix::from_csr(&s.b);
            let n = s.num_displacement();
            let mut expect = DenseMatrix::from_csr(&s.a);
            for j in 0..n {
                let col: Vec<f64> = (0..b.nrows()).map(|i| b[(i, j)]).collect();
                let y = cinv.solve(&col).unwrap();
                let by = b.transpose().matvec(&y);
                for i in 0..n {
                    expect[(i, j)] += lam * by[i];
                }
            }
            let got = DenseMatrix::from_csr(&op.matrix);
            let err = got.data().iter().zip(expect.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-8 * expect.max_abs(), "{kind:?}: {err}");
        }
    }

    #[test]
    fn nearly_incompressible_is_spd() {
        let c = CoefficientField::constant(1, 1, 1.0, 0.4999).unwrap();
        let s = system(Discretization::FemQ2P1, 1, 2, c);
        let op = eliminate_pressure(&s).unwrap();
        let ev = symmetric_eigenvalues(&DenseMatrix::from_csr(&op.matrix)).unwrap();
        assert!(ev[0] > 0.0);
        assert!(op.matrix.max_asymmetry() < 1e-9 * op.matrix.max_abs());
    }

    #[test]
    fn recovered_pressure_solves_saddle_system() {
        for nu in [0.3, 0.4999] {
            let c = CoefficientField::constant(3, 3, 1.0, nu).unwrap();
            let s = system(Discretization::FemQ2P1, 3, 2, c);
            let op = eliminate_pressure(&s).unwrap();
            let u = DirectSolver::spd(&op.matrix).unwrap().solve(&op.rhs).unwrap();
            let p = recover_pressure(&op, &u).unwrap();
            let mut x = u.clone();
            x.extend_from_slice(&p);
            let k = s.matrix();
            let r: Vec<f64> = k.spmv(&x).unwrap().iter().zip(s.full_rhs()).map(|(a, b)| a - b).collect();
            assert!(norm2(&r) <= 1e-8 * norm2(&s.rhs), "nu={nu}");
        }
    }

    #[test]
    fn zero_displacement_gives_zero_pressure() {
        let c = CoefficientField::constant(2, 2, 1.0, 0.3).unwrap();
        let s = system(Discretization::Sem(3), 2, 1, c);
        let op = eliminate_pressure(&s).unwrap();
        let p = recover_pressure(&op, &vec![0.0; op.dim()]).unwrap();
        assert!(p.iter().all(|&v| v == 0.0));
        assert!(apply_spd(&op, &vec![0.0; op.dim()]).unwrap().iter().all(|&v| v == 0.0));
        assert!(apply_spd(&op, &[1.0]).is_err());
    }

    #[test]
    fn divergence_free_rotation_has_no_pressure() {
        // Rigid rotation about the center on elements whose nodes are all free.
        let c = CoefficientField::constant(1, 1, 1.0, 0.3).unwrap();
        let s = system(Discretization::FemQ2P1, 1, 4, c);
        let op = eliminate_pressure(&s).unwrap();
        let mut u = vec![0.0; op.dim()];
        for d in (0..op.dim()).step_by(2) {
            let (x, y) = s.dofmap.dof_coords(d);
            u[d] = -(y - 0.5);
            u[d + 1] = x - 0.5;
        }
        let p = recover_pressure(&op, &u).unwrap();
        let np = s.dofmap.pressure_per_element;
        for e in [5, 6, 9, 10] {
            for j in 0..np {
                assert!(p[e * np + j].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matvec_matches_dense() {
        let c = CoefficientField::constant(2, 2, 1.0, 0.49).unwrap();
        let s = system(Discretization::Sem(3), 2, 2, c);
        let op = eliminate_pressure(&s).unwrap();
        let d = DenseMatrix::from_csr(&op.matrix);
        let x: Vec<f64> = (0..op.dim()).map(|i| (i as f64 * 0.37).cos()).collect();
        let y = apply_spd(&op, &x).unwrap();
        let z = d.matvec(&x);
        assert!(y.iter().zip(&z).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn positive_and_monotone_in_lambda(seed in 0u64..1000, l1 in 0.0f64..100.0, dl in 0.0f64..100.0) {
            use rand::{Rng, SeedableRng};
            let mk = |l: f64| {
                let c = CoefficientField::uniform(2, 2, Material { mu: 1.0, lambda: Lambda::Finite(l) });
                eliminate_pressure(&system(Discretization::FemQ2P1, 2, 1, c)).unwrap()
            };
            let (o1, o2) = (mk(l1), mk(l1 + dl));
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..o1.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let e1 = crate::linalg::dot(&x, &apply_spd(&o1, &x).unwrap());
            let e2 = crate::linalg::dot(&x, &apply_spd(&o2, &x).unwrap());
            prop_assert!(e1 > 0.0);
            prop_assert!(e2 >= e1 - 1e-12 * e2.abs());
        }
    }
}
