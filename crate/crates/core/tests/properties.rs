mod common;

use cmi_lab::channels::{ChannelLayer, SiteChannel};
use cmi_lab::classical;
use cmi_lab::dense;
use cmi_lab::model::Partition;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct ClassicalInstance {
    h: cmi_lab::model::LocalHamiltonian,
    beta: f64,
    layer: ChannelLayer,
    p: Partition,
}

fn classical_instance(seed: u64) -> (ClassicalInstance, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=5);
    let q = rng.gen_range(2..=3);
    let h = common::random_classical_model(&mut rng, n, q);
    let p = common::random_partition(&mut rng, n);
    let layer = common::random_transition_layer(&mut rng, n, q, p.b());
    let beta = rng.gen_range(0.0..2.0);
    (ClassicalInstance { h, beta, layer, p }, rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn classical_ssa_and_data_processing(seed in any::<u64>()) {
        let (inst, mut rng) = classical_instance(seed);
        let (n, q) = (inst.h.n_sites(), inst.h.q());
        let d = classical::apply_transitions(&classical::gibbs_distribution(&inst.h, inst.beta).unwrap(), &inst.layer).unwrap();
        let before = classical::cmi_raw(&d, &inst.p);
        prop_assert!(before >= -1e-8, "CMI {before:e}");
        let mut outer: Vec<usize> = inst.p.a().to_vec();
        outer.extend_from_slice(inst.p.c());
        let post = common::random_transition_layer(&mut rng, n, q, &outer);
        let after = classical::cmi_raw(&classical::apply_transitions(&d, &post).unwrap(), &inst.p);
        prop_assert!(after >= -1e-8);
        prop_assert!(after <= before + 1e-9, "{after:e} > {before:e}");
    }

    #[test]
    fn quantum_ssa_and_data_processing(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(3..=5);
        let n_terms = rng.gen_range(2..=2 * n);
        let h = common::random_stabilizer_model(&mut rng, n, n_terms);
        let p = common::random_partition(&mut rng, n);
        let layer = common::random_pauli_layer(&mut rng, n);
        let beta = rng.gen_range(0.0..2.0);
        let rho = dense::apply_layer(&dense::gibbs_state(&h, beta).unwrap(), &layer).unwrap();
        let before = dense::quantum_cmi(&rho, &p).unwrap();
        prop_assert!(before >= -1e-8, "CMI {before:e}");
        let mut post = ChannelLayer::identity(n, 2);
        for &s in p.a().iter().chain(p.c()) {
            let c = if rng.gen_bool(0.5) {
                SiteChannel::amplitude_damping(s, rng.gen_range(0.0..1.0))
            } else {
                SiteChannel::depolarizing(s, 2, rng.gen_range(0.0..1.0))
            };
            post.push(c.unwrap()).unwrap();
        }
        let after = dense::quantum_cmi(&dense::apply_layer(&rho, &post).unwrap(), &p).unwrap();
        prop_assert!(after >= -1e-8);
        prop_assert!(after <= before + 1e-8, "{after:e} > {before:e}");
    }

    #[test]
    fn post_selection_identity(seed in any::<u64>()) {
        let (inst, _) = classical_instance(seed);
        let d = classical::apply_transitions(&classical::gibbs_distribution(&inst.h, inst.beta).unwrap(), &inst.layer).unwrap();
        let parts = classical::post_select_decompose(&d, &inst.p).unwrap();
        let weighted: f64 = parts.iter().map(|s| s.probability * s.mutual_information).sum();
        let total: f64 = parts.iter().map(|s| s.probability).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let cmi = classical::cmi_raw(&d, &inst.p);
        prop_assert!((cmi - weighted).abs() <= 1e-10, "{cmi:e} vs {weighted:e}");
    }

    #[test]
    fn pinned_gibbs_matches_post_selection(seed in any::<u64>()) {
        let (inst, _) = classical_instance(seed);
        for y in classical::all_outcomes(inst.p.b().len(), inst.h.q()) {
            let post = classical::postselected_conditional(&inst.h, inst.beta, &inst.layer, &y).unwrap();
            let pinned = classical::pinned_hamiltonian(&inst.h, inst.beta, &inst.layer, &y).unwrap().marginal_off_y().unwrap();
            prop_assert!(post.total_variation(&pinned) <= 1e-12);
        }
    }
}
