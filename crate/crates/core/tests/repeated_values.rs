use nlgame_core::game::{anticorrelation, chsh, tensor_power};
use nlgame_core::values::{ns_value, sns_value, threshold_value, SolveOptions, StrategyClass};

fn opts() -> SolveOptions {
    SolveOptions::default()
}

#[test]
fn chsh_square_is_won_by_product_boxes() {
    let v = threshold_value(&chsh(), 2, 1.0, StrategyClass::Ns, &opts()).unwrap();
    assert!((v.value - 1.0).abs() < 1e-7);
}

#[test]
fn one_copy_threshold_matches_plain_value() {
    let game = anticorrelation();
    let plain = ns_value(&game).unwrap().value;
    let t = threshold_value(&game, 1, 1.0, StrategyClass::Ns, &opts()).unwrap().value;
    assert!((plain - t).abs() < 1e-7);
}

#[test]
fn lower_threshold_is_easier() {
    let game = anticorrelation();
    let all = threshold_value(&game, 2, 1.0, StrategyClass::Sns, &opts()).unwrap().value;
    let half = threshold_value(&game, 2, 0.5, StrategyClass::Sns, &opts()).unwrap().value;
    assert!(half >= all - 1e-7);
}

#[test]
fn sns_dominates_ns_on_a_power() {
    let rg = tensor_power(&chsh(), 2, 10_000_000).unwrap();
    let ns = ns_value(rg.game()).unwrap().value;
    let sns = sns_value(rg.game()).unwrap().value;
    assert!(sns >= ns - 1e-7);
}

#[test]
fn anticorrelation_square_keeps_its_value() {
    let v = threshold_value(&anticorrelation(), 2, 1.0, StrategyClass::Ns, &opts()).unwrap();
    assert!((v.value - 2.0 / 3.0).abs() < 1e-7);
}

#[test]
fn chsh_cube_is_won_by_product_boxes() {
    let v = threshold_value(&chsh(), 3, 1.0, StrategyClass::Ns, &opts()).unwrap();
    assert!((v.value - 1.0).abs() < 1e-7);
}
