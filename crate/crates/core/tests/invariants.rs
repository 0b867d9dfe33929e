use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use coolant_core::biaslab::{gaussian_joint, indicator_cov, EventSpec, Tail, Variable};
use coolant_core::encoder::{encode, Encoder, EncoderConfig};
use coolant_core::molgraph::iso::is_isomorphic;
use coolant_core::molgraph::random::{random_molecule, Handle, SkeletonSpec};
use coolant_core::molgraph::{parse_smiles, write_smiles, MolGraph};
use coolant_core::nncore::Params;
use coolant_core::reactor::{count_from_sizes, count_products, ProductStream, Reactant, ReactantSets, Shard};

fn molecule(seed: u64, handle: Handle) -> MolGraph {
    random_molecule(&mut ChaCha8Rng::seed_from_u64(seed), &SkeletonSpec::default(), handle)
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    p
}

fn sets(alcohols: usize, chlorides: usize, acids: usize, seed: u64) -> ReactantSets {
    let make = |n: usize, h: Handle, tag: &str, off: u64| {
        (0..n)
            .map(|i| Reactant::new(format!("{tag}{i}"), molecule(seed * 1000 + off + i as u64, h)))
            .collect::<Vec<_>>()
    };
    ReactantSets {
        alcohols: make(alcohols, Handle::Alcohol, "A", 0),
        chlorides: make(chlorides, Handle::Chloride, "C", 300),
        acids: make(acids, Handle::Acid, "K", 600),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smiles_round_trip_is_isomorphic(seed in any::<u64>()) {
        let g = molecule(seed, Handle::None);
        let s = write_smiles(&g);
        let back = parse_smiles(&s).unwrap();
        prop_assert!(is_isomorphic(&g, &back));
        prop_assert_eq!(write_smiles(&back), s);
    }

    #[test]
    fn canonical_smiles_ignores_atom_order(seed in any::<u64>(), perm_seed in any::<u64>()) {
        let g = molecule(seed, Handle::None);
        let p = g.permuted(&permutation(g.atom_count(), perm_seed));
        prop_assert_eq!(write_smiles(&g), write_smiles(&p));
    }

    #[test]
    fn encoder_ignores_atom_order(seed in any::<u64>(), perm_seed in any::<u64>()) {
        let mut params = Params::new();
        let enc = Encoder::new(&mut params, EncoderConfig { hidden: 8, latent: 4, ..Default::default() }, 3).unwrap();
        let g = molecule(seed, Handle::None);
        let p = g.permuted(&permutation(g.atom_count(), perm_seed));
        let a = encode(&g, &enc, &params).unwrap();
        let b = encode(&p, &enc, &params).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn shards_partition_products(n in 1usize..7, c in 0usize..3, k in 0usize..3, shards in 1usize..5, seed in 0u64..1000) {
        let s = sets(n, c, k, seed);
        let key = |p: &coolant_core::reactor::ProductRecord| (format!("{:?}", p.reaction), p.parents);
        let mut whole: Vec<_> = ProductStream::new(&s, Shard::WHOLE).map(|p| key(&p)).collect();
        let mut parts = Vec::new();
        let mut counted = 0;
        for index in 0..shards {
            let shard = Shard { index, count: shards };
            let here: Vec<_> = ProductStream::new(&s, shard).map(|p| key(&p)).collect();
            counted += count_products(&s, shard).total;
            parts.extend(here);
        }
        prop_assert_eq!(counted as usize, whole.len());
        whole.sort();
        parts.sort();
        prop_assert_eq!(parts, whole);
    }

    #[test]
    fn size_counts_are_products(a in 0u64..100_000, c in 0u64..100_000, x in 0u64..100_000) {
        let counts = count_from_sizes(a, c, x);
        prop_assert_eq!(counts.ethers, a * c);
        prop_assert_eq!(counts.esters, a * x);
        prop_assert_eq!(counts.total, a * c + a * x);
    }

    #[test]
    fn joint_probability_is_symmetric_and_bounded(t1 in -3.0f64..3.0, t2 in -3.0f64..3.0, rho in -0.99f64..0.99) {
        let p = gaussian_joint(t1, Tail::Greater, t2, Tail::Greater, rho).unwrap();
        let q = gaussian_joint(t2, Tail::Greater, t1, Tail::Greater, rho).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p - q).abs() < 1e-10);
        // Complement events sum to one.
        let total = p
            + gaussian_joint(t1, Tail::Greater, t2, Tail::Less, rho).unwrap()
            + gaussian_joint(t1, Tail::Less, t2, Tail::Greater, rho).unwrap()
            + gaussian_joint(t1, Tail::Less, t2, Tail::Less, rho).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn indicator_gap_equals_covariance(points in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..200), t1 in -2.0f64..2.0, t2 in -2.0f64..2.0) {
        let u = EventSpec::new(Variable::X, Tail::Greater, t1).unwrap();
        let v = EventSpec::new(Variable::Y, Tail::Less, t2).unwrap();
        let est = indicator_cov(&points, &u, &v).unwrap();
        prop_assert!((est.p_joint - est.product - est.cov_indicators).abs() < 1e-12);
        prop_assert!(est.p_joint <= est.p_u.min(est.p_v) + 1e-15);
    }
}
