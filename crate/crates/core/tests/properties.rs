use cellhom::ergodic::{CorrectorField, CorrectorKind, OccupationGrid};
use cellhom::fields::{Expr, TrigTerm, UnaryFn};
use cellhom::fk::Domain;
use cellhom::grid::Grid;
use cellhom::lattice::{hermite_normal_form, in_lattice, period_lattice, SupportMask};
use cellhom::sde::LiftedState;
use proptest::prelude::*;

fn histogram(grid: Grid, counts: Vec<u64>) -> OccupationGrid {
    OccupationGrid::from_counts(grid, counts).unwrap()
}

fn counts(len: usize) -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(0u64..1000, len)
}

proptest! {
    #[test]
    fn merge_is_a_commutative_monoid(a in counts(16), b in counts(16), c in counts(16)) {
        let grid = Grid::new(4, 2);
        let (a, b, c) = (histogram(grid, a), histogram(grid, b), histogram(grid, c));
        let empty = OccupationGrid::new(grid);
        prop_assert_eq!(a.merge(&b).unwrap(), b.merge(&a).unwrap());
        prop_assert_eq!(a.merge(&b).unwrap().merge(&c).unwrap(), a.merge(&b.merge(&c).unwrap()).unwrap());
        prop_assert_eq!(a.merge(&empty).unwrap(), a.clone());
    }
}

fn generators() -> impl Strategy<Value = Vec<Vec<i64>>> {
    prop::collection::vec(prop::collection::vec(-6i64..=6, 3), 1..5)
}

proptest! {
    #[test]
    fn hnf_ignores_order_and_unimodular_moves(gens in generators(), k in -3i64..=3, i in 0usize..5, j in 0usize..5) {
        let base = hermite_normal_form(&gens, 3);
        let mut reversed = gens.clone();
        reversed.reverse();
        prop_assert_eq!(hermite_normal_form(&reversed, 3), base.clone());
        let (i, j) = (i % gens.len(), j % gens.len());
        if i != j {
            let mut moved = gens.clone();
            for q in 0..3 {
                moved[i][q] += k * gens[j][q];
            }
            prop_assert_eq!(hermite_normal_form(&moved, 3), base.clone());
        }
        let mut negated = gens.clone();
        negated[0].iter_mut().for_each(|v| *v = -*v);
        prop_assert_eq!(hermite_normal_form(&negated, 3), base);
    }

    #[test]
    fn generated_group_is_closed(gens in generators(), i in 0usize..5, j in 0usize..5) {
        let basis = hermite_normal_form(&gens, 3);
        let (g1, g2) = (&gens[i % gens.len()], &gens[j % gens.len()]);
        let sum: Vec<i64> = g1.iter().zip(g2).map(|(a, b)| a + b).collect();
        let neg: Vec<i64> = g1.iter().map(|a| -a).collect();
        prop_assert!(in_lattice(&basis, g1));
        prop_assert!(in_lattice(&basis, &sum));
        prop_assert!(in_lattice(&basis, &neg));
    }
}

/// Strip `{(i, j) : (j − s·i) mod n < w}` winding once along `(1, s)`;
/// connected when `w > s`.
fn strip(n: usize, slope: usize, width: usize, shift: (usize, usize)) -> SupportMask {
    let grid = Grid::new(n, 2);
    let mask = (0..grid.len())
        .map(|c| {
            let m = grid.multi_index(c);
            let (i, j) = ((m[0] + n - shift.0) % n, (m[1] + n - shift.1) % n);
            (j + n * n - slope * i) % n < width
        })
        .collect();
    SupportMask::from_cells(grid, mask).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn period_lattice_invariant_under_translation_and_base(
        slope in 0usize..3, extra in 1usize..3, si in 0usize..16, sj in 0usize..16, pick in 0usize..1000,
    ) {
        let width = slope + extra;
        let plain = period_lattice(&strip(16, slope, width, (0, 0)), None, None).unwrap();
        let moved = strip(16, slope, width, (si, sj));
        let cells: Vec<usize> = (0..moved.grid.len()).filter(|&c| moved.mask[c]).collect();
        let based = period_lattice(&moved, None, Some(cells[pick % cells.len()])).unwrap();
        prop_assert_eq!(&plain.hnf_basis, &based.hnf_basis);
        prop_assert_eq!(plain.rank, 1);
        prop_assert!(plain.contains(&[1, slope as i64]));
    }
}

fn trig_expr() -> impl Strategy<Value = Expr> {
    let term = (prop::collection::vec(-2i64..=2, 2), -1.0f64..1.0, -1.0f64..1.0)
        .prop_map(|(k, c, s)| TrigTerm { k, cos: c, sin: s });
    prop::collection::vec(term, 1..4).prop_map(Expr::trig)
}

fn smooth_expr() -> impl Strategy<Value = Expr> {
    (trig_expr(), trig_expr(), 0usize..3).prop_map(|(a, b, shape)| match shape {
        0 => Expr::sum(vec![a, b]),
        1 => Expr::product(vec![a, b]),
        _ => Expr::apply(UnaryFn::Exp, Expr::scale(0.5, a)),
    })
}

proptest! {
    #[test]
    fn partials_match_central_differences(e in smooth_expr(), x in prop::collection::vec(0.0f64..1.0, 2)) {
        let h = 1e-3;
        for axis in 0..2 {
            let at = |t: f64| {
                let mut p = x.clone();
                p[axis] += t * h;
                e.value(&p, &[])
            };
            // fourth-order central stencil
            let fd = (8.0 * (at(1.0) - at(-1.0)) - (at(2.0) - at(-2.0))) / (12.0 * h);
            let exact = Expr::partial(&e, axis).value(&x, &[]);
            prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{} vs {}", fd, exact);
        }
    }

    #[test]
    fn corrector_interpolation_is_periodic(
        values in prop::collection::vec(-1.0f64..1.0, 64),
        y in prop::collection::vec(0.0f64..1.0, 2),
        shift in prop::collection::vec(-3i64..=3, 2),
    ) {
        let grid = Grid::new(8, 2);
        let field = CorrectorField::exact(grid, CorrectorKind::Scalar, values, vec![0.0; 128]);
        let shifted: Vec<f64> = y.iter().zip(&shift).map(|(a, k)| a + *k as f64).collect();
        let (mut u, mut v) = ([0.0], [0.0]);
        field.value_at(&y, &mut u);
        field.value_at(&shifted, &mut v);
        prop_assert!((u[0] - v[0]).abs() < 1e-12);
    }

    #[test]
    fn wrap_preserves_the_lift(x in prop::collection::vec(-50.0f64..50.0, 3)) {
        let s = LiftedState::from_lift(&x);
        for i in 0..3 {
            prop_assert!((0.0..1.0).contains(&s.y[i]));
            prop_assert!((s.lift_at(i) - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_lands_on_the_boundary(
        x in prop::collection::vec(-3.0f64..3.0, 2),
        r in 0.1f64..2.0,
        lo in prop::collection::vec(-2.0f64..-0.1, 2),
        hi in prop::collection::vec(0.1f64..2.0, 2),
    ) {
        for domain in [Domain::ball(vec![0.3, -0.2], r), Domain::Box { lo: lo.clone(), hi: hi.clone() }] {
            let p = domain.project(&x);
            prop_assert!(domain.signed_distance(&p).abs() < 1e-10, "{:?} -> {:?}", x, p);
        }
    }
}
