use chiral_qnet::netsim::{exact_chain_fidelity, run_shots, summarize, ChainConfig, LinkModel};
use chiral_qnet::parity::Protocol;
use chiral_qnet::protocols::{PairState, ParityImpl};

fn config(n_links: usize, parity: ParityImpl, rounds: u32, raw: PairState) -> ChainConfig {
    ChainConfig {
        n_links,
        link: LinkModel::new(0.4, raw, 1.0).unwrap(),
        parity,
        purify_rounds: rounds,
        rng_seed: 11,
    }
}

fn check(cfg: &ChainConfig, shots: u64) {
    let exact = exact_chain_fidelity(cfg).unwrap();
    let s = summarize(&run_shots(cfg, shots).unwrap());
    let tol = (3.0 * s.std_error).max(1e-12);
    assert!(
        (s.mean_fidelity - exact).abs() <= tol,
        "mean {} vs exact {exact}, se {}",
        s.mean_fidelity,
        s.std_error
    );
}

#[test]
fn monte_carlo_matches_exact_contraction() {
    // Detuned one-click parity makes the four swap labels differ in fidelity.
    let lossy = ParityImpl::OneClick {
        p0: chiral_qnet::scatter::EmitterParams::new(0.9, 0.2).unwrap(),
        p1: chiral_qnet::scatter::EmitterParams::new(0.85, -0.1).unwrap(),
    };
    let raw = PairState::bell_diagonal([0.85, 0.08, 0.05, 0.02]).unwrap();
    for n in 1..=3 {
        check(&config(n, lossy, 0, raw.clone()), 10_000);
    }
    let two_click = ParityImpl::symmetric(Protocol::TwoClick, 0.9, 0.1).unwrap();
    check(&config(3, two_click, 1, raw), 10_000);
}

#[test]
fn purification_round_does_not_hurt_on_same_seed() {
    let parity = ParityImpl::symmetric(Protocol::TwoClick, 0.9, 0.0).unwrap();
    let raw = PairState::werner(0.85).unwrap();
    let zero = config(2, parity, 0, raw.clone());
    let one = config(2, parity, 1, raw);
    let f0 = summarize(&run_shots(&zero, 200).unwrap()).mean_fidelity;
    let f1 = summarize(&run_shots(&one, 200).unwrap()).mean_fidelity;
    assert!(f1 >= f0, "{f1} < {f0}");
    assert!(exact_chain_fidelity(&one).unwrap() >= exact_chain_fidelity(&zero).unwrap());
}
