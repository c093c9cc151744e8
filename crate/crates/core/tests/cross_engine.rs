mod common;

use cmi_lab::dense;
use cmi_lab::pauli;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn pauli_and_dense_marginal_entropies_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0013);
    for instance in 0..20 {
        let n = rng.gen_range(3..=8);
        let n_terms = rng.gen_range(2..=2 * n);
        let h = common::random_stabilizer_model(&mut rng, n, n_terms);
        let layer = common::random_pauli_layer(&mut rng, n);
        let beta = rng.gen_range(0.1..1.5);
        let expansion = pauli::apply_pauli_layer(&pauli::expand_gibbs(&h, beta).unwrap(), &layer).unwrap();
        let rho = dense::apply_layer(&dense::gibbs_state(&h, beta).unwrap(), &layer).unwrap();
        let mut worst = 0.0f64;
        for mask in 1u32..(1 << n) {
            let region: Vec<usize> = (0..n).filter(|&s| mask >> s & 1 == 1).collect();
            let a = pauli::marginal_entropy(&expansion, &region).unwrap();
            let b = dense::region_entropy(&rho, &region).unwrap();
            worst = worst.max((a - b).abs());
        }
        assert!(worst <= 1e-10, "instance {instance}: n = {n}, worst gap {worst:e}");
    }
}

#[test]
fn engines_agree_on_cmi_of_builtin_chains() {
    use cmi_lab::experiments::{cmi_with_engine, Beta, ChannelKindSpec, ChannelSpec, Engine};
    use cmi_lab::model::{zoo, Partition};
    let h = zoo::cluster_chain(7).unwrap();
    let p = Partition::chain_ends(7, 2).unwrap();
    let layer = ChannelSpec::with_p(ChannelKindSpec::Depolarizing, 0.4).layer(7, 2, p.b()).unwrap();
    let beta = Beta::new(0.6).unwrap();
    let d = cmi_with_engine(Engine::Dense, &h, beta, &layer, &p).unwrap();
    let q = cmi_with_engine(Engine::Pauli, &h, beta, &layer, &p).unwrap();
    assert!((d - q).abs() < 1e-10, "{d} vs {q}");

    let h = zoo::ising_chain(6, -1.0).unwrap();
    let p = Partition::chain_ends(6, 1).unwrap();
    let layer = ChannelSpec::with_p(ChannelKindSpec::Bitflip, 0.2).layer(6, 2, p.b()).unwrap();
    let values: Vec<f64> = [Engine::Classical, Engine::Dense, Engine::Pauli]
        .into_iter()
        .map(|e| cmi_with_engine(e, &h, Beta::new(0.4).unwrap(), &layer, &p).unwrap())
        .collect();
    assert!(values.iter().all(|v| (v - values[0]).abs() < 1e-10), "{values:?}");
}
