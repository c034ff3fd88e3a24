//! Built-in checks against the library's worked examples; each prints one
//! pass/fail line and the command exits nonzero naming the first failure.

use num_bigint::BigUint;
use povf::chain;
use povf::clocksync;
use povf::metrics::{self, BlockCountSet};
use povf::vdf::{self, CancelToken, VdfParams};
use povf::vrf;

use crate::{EXIT_OK, EXIT_VERIFY_FALSE};

struct Case {
    name: &'static str,
    run: fn() -> Result<(), String>,
}

fn expect<T: PartialEq + std::fmt::Debug>(what: &str, got: T, want: T) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("{what}: got {got:?}, want {want:?}"))
    }
}

fn example_params() -> VdfParams {
    VdfParams::new(BigUint::from(101u32), BigUint::from(41u32), 10, 5).expect("example params")
}

fn vdf_example_2() -> Result<(), String> {
    let params = example_params();
    let out = vdf::eval(&params, &BigUint::from(2u32), 10, &CancelToken::never())
        .map_err(|e| e.to_string())?;
    expect("x_1", out.output.clone(), BigUint::from(5u32))?;
    expect("pi_1", out.proof.clone(), BigUint::from(5u32))?;
    expect(
        "verify",
        vdf::verify(&params, &BigUint::from(2u32), &out.output, &out.proof, 10),
        true,
    )
}

fn vdf_hand_traces() -> Result<(), String> {
    let params = example_params();
    let out = vdf::eval(&params, &BigUint::from(3u32), 2, &CancelToken::never())
        .map_err(|e| e.to_string())?;
    expect("3^(2^2) mod 101", out.output, BigUint::from(81u32))?;
    expect("proof at q=0", out.proof, BigUint::from(1u32))?;
    let out = vdf::eval(&params, &BigUint::from(2u32), 1, &CancelToken::never())
        .map_err(|e| e.to_string())?;
    expect("2^2 mod 101", out.output, BigUint::from(4u32))?;
    expect("single-round proof", out.proof, BigUint::from(1u32))
}

fn vrf_round_trip() -> Result<(), String> {
    let keypair = vrf::keygen_with_bits(b"selftest", 192).map_err(|e| e.to_string())?;
    let out = vrf::eval(&keypair.secret, b"message").map_err(|e| e.to_string())?;
    expect("verify", vrf::verify(&keypair.public, b"message", &out), true)?;
    let mut tampered = out.clone();
    tampered.proof[0] ^= 1;
    expect(
        "tampered proof rejected",
        vrf::verify(&keypair.public, b"message", &tampered),
        false,
    )
}

fn gini_examples() -> Result<(), String> {
    let g = metrics::gini(&BlockCountSet(vec![0, 0, 0, 4])).map_err(|e| e.to_string())?;
    expect("gini({0,0,0,4})", metrics::to_decimal(&g), "0.75".to_string())?;
    let g = metrics::gini(&BlockCountSet(vec![1, 3])).map_err(|e| e.to_string())?;
    expect("gini({1,3})", metrics::to_decimal(&g), "0.25".to_string())?;
    let g = metrics::gini(&BlockCountSet(vec![6, 6, 6])).map_err(|e| e.to_string())?;
    expect("gini(uniform)", metrics::to_decimal(&g), "0".to_string())
}

fn std_dev_examples() -> Result<(), String> {
    let s = metrics::std_dev(&BlockCountSet(vec![1, 2, 3, 4])).map_err(|e| e.to_string())?;
    if (s - 1.25f64.sqrt()).abs() > 1e-12 {
        return Err(format!("sigma({{1,2,3,4}}): got {s}, want sqrt(1.25)"));
    }
    let s = metrics::std_dev(&BlockCountSet(vec![0, 0, 0, 4])).map_err(|e| e.to_string())?;
    if (s - 3f64.sqrt()).abs() > 1e-12 {
        return Err(format!("sigma({{0,0,0,4}}): got {s}, want sqrt(3)"));
    }
    Ok(())
}

fn ntp_example() -> Result<(), String> {
    expect(
        "theta(100,150,160,120)",
        clocksync::ntp_offset(100, 150, 160, 120).map_err(|e| e.to_string())?,
        45,
    )
}

fn merkle_empty() -> Result<(), String> {
    expect(
        "merkle([])",
        hex::encode(chain::merkle_root(&[])),
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855".to_string(),
    )
}

pub fn run() -> u8 {
    let cases = [
        Case { name: "vdf-example-2", run: vdf_example_2 },
        Case { name: "vdf-hand-traces", run: vdf_hand_traces },
        Case { name: "vrf-round-trip", run: vrf_round_trip },
        Case { name: "gini-examples", run: gini_examples },
        Case { name: "std-dev-examples", run: std_dev_examples },
        Case { name: "ntp-offset", run: ntp_example },
        Case { name: "merkle-empty", run: merkle_empty },
    ];
    let mut failed = false;
    for case in &cases {
        match (case.run)() {
            Ok(()) => println!("{}: PASS", case.name),
            Err(why) => {
                println!("{}: FAIL ({why})", case.name);
                failed = true;
            }
        }
    }
    if failed {
        EXIT_VERIFY_FALSE
    } else {
        EXIT_OK
    }
}
