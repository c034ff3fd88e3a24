//! `povf vdf` subcommands: eval, verify, bench.
//!
//! Big-integer flags parse as decimal, or hex with an `0x` prefix; outputs
//! print as bare lowercase hex.

use clap::{Args, Subcommand};
use num_bigint::BigUint;
use povf::vdf::{self, CancelToken, VdfParams};
use std::time::Instant;

use crate::{EXIT_INTERNAL, EXIT_OK, EXIT_USAGE, EXIT_VERIFY_FALSE};

#[derive(Subcommand)]
pub enum VdfCommand {
    /// Compute y = x^(2^t) mod n with its proof
    Eval(EvalArgs),
    /// Check a claimed (y, pi) pair; exits 0 when valid, 1 when not
    Verify(VerifyArgs),
    /// Time eval at T and 10T plus verify, reporting the scaling ratio
    Bench(BenchArgs),
}

#[derive(Args)]
pub struct EvalArgs {
    /// Group modulus N (decimal, or hex with 0x prefix)
    #[arg(long)]
    n: String,
    /// Proof prime l
    #[arg(long)]
    l: String,
    /// Input x
    #[arg(long)]
    x: String,
    /// Sequential squaring rounds
    #[arg(long)]
    t: u64,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long)]
    n: String,
    #[arg(long)]
    l: String,
    /// The evaluation input x
    #[arg(long)]
    x: String,
    /// The claimed output y
    #[arg(long)]
    y: String,
    /// The claimed proof pi
    #[arg(long)]
    pi: String,
    #[arg(long)]
    t: u64,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Modulus width for generated parameters
    #[arg(long, default_value_t = 2048)]
    bits: u32,
    /// Base round count; the sweep also times 10x this
    #[arg(long, default_value_t = 100_000)]
    t: u64,
    /// Parameter generation seed
    #[arg(long, default_value = "povf-bench")]
    seed: String,
}

fn parse_biguint(text: &str) -> Result<BigUint, String> {
    let parsed = if let Some(hex_part) = text.strip_prefix("0x") {
        BigUint::parse_bytes(hex_part.as_bytes(), 16)
    } else {
        BigUint::parse_bytes(text.as_bytes(), 10)
    };
    parsed.ok_or_else(|| format!("`{text}` is not a valid integer"))
}

fn parse_params(n: &str, l: &str, t: u64) -> Result<VdfParams, String> {
    let n = parse_biguint(n)?;
    let l = parse_biguint(l)?;
    if t == 0 {
        return Err("t must be at least 1".into());
    }
    VdfParams::new(n, l, t, 1).map_err(|e| e.to_string())
}

pub fn run(command: VdfCommand) -> u8 {
    match command {
        VdfCommand::Eval(args) => eval(args),
        VdfCommand::Verify(args) => verify(args),
        VdfCommand::Bench(args) => bench(args),
    }
}

fn eval(args: EvalArgs) -> u8 {
    let (params, x) = match parse_params(&args.n, &args.l, args.t)
        .and_then(|p| Ok((p, parse_biguint(&args.x)?)))
    {
        Ok(v) => v,
        Err(why) => {
            eprintln!("error: {why}");
            return EXIT_USAGE;
        }
    };
    match vdf::eval(&params, &x, args.t, &CancelToken::never()) {
        Ok(out) => {
            println!(
                "y={} pi={}",
                out.output.to_str_radix(16),
                out.proof.to_str_radix(16)
            );
            EXIT_OK
        }
        Err(why) => {
            eprintln!("error: {why}");
            EXIT_USAGE
        }
    }
}

fn verify(args: VerifyArgs) -> u8 {
    let parsed = parse_params(&args.n, &args.l, args.t).and_then(|p| {
        Ok((
            p,
            parse_biguint(&args.x)?,
            parse_biguint(&args.y)?,
            parse_biguint(&args.pi)?,
        ))
    });
    let (params, x, y, pi) = match parsed {
        Ok(v) => v,
        Err(why) => {
            eprintln!("error: {why}");
            return EXIT_USAGE;
        }
    };
    if vdf::verify(&params, &x, &y, &pi, args.t) {
        println!("true");
        EXIT_OK
    } else {
        println!("false");
        EXIT_VERIFY_FALSE
    }
}

fn bench(args: BenchArgs) -> u8 {
    if args.t == 0 {
        eprintln!("error: t must be at least 1");
        return EXIT_USAGE;
    }
    println!("generating {}-bit parameters...", args.bits);
    let params = match vdf::setup(args.bits, args.t, 1, args.seed.as_bytes()) {
        Ok(p) => p,
        Err(why) => {
            eprintln!("error: {why}");
            return EXIT_INTERNAL;
        }
    };
    let x = BigUint::from(0xb1e55ed5_u64);
    let mut timings = Vec::new();
    for rounds in [args.t, args.t * 10] {
        let start = Instant::now();
        let out = match vdf::eval(&params, &x, rounds, &CancelToken::never()) {
            Ok(out) => out,
            Err(why) => {
                eprintln!("error: {why}");
                return EXIT_INTERNAL;
            }
        };
        let eval_time = start.elapsed();
        let start = Instant::now();
        let ok = vdf::verify(&params, &x, &out.output, &out.proof, rounds);
        let verify_time = start.elapsed();
        if !ok {
            eprintln!("error: self-verification failed at T={rounds}");
            return EXIT_INTERNAL;
        }
        println!(
            "T={rounds}: eval {:.3}s, verify {:.6}s ({:.4}% of eval)",
            eval_time.as_secs_f64(),
            verify_time.as_secs_f64(),
            100.0 * verify_time.as_secs_f64() / eval_time.as_secs_f64()
        );
        timings.push(eval_time.as_secs_f64());
    }
    println!("eval time ratio 10T/T: {:.2}", timings[1] / timings[0]);
    EXIT_OK
}
