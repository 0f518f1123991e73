mod commands;
mod inputs;
mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use metric_fractals::formats::IfsFile;
use serde_json::json;

use commands::{
    AttractorArgs, Common, EmbedArgs, KameyamaArgs, QuotientArgs, RealizeArgs, Target,
};
use inputs::{Backend, SpaceExample, SystemExample};
use manifest::{pretty, write_run, Run, Status};

/// Attractors, Kameyama metrics and embeddings of metric fractals.
#[derive(Debug, Parser)]
#[command(name = "mfrac", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Iterate the Hutchinson operator; writes CSV and SVG point clouds.
    Attractor(AttractorArgs),
    /// Chain distances on the cylinder lattice of a system.
    Kameyama(KameyamaArgs),
    /// Embed a finite metric space into the line or into Hilbert space.
    Embed(EmbedArgs),
    /// Build and verify the four-map system on Z and Y.
    Realize(RealizeArgs),
    /// Code-space quotient pseudometric.
    Quotient(QuotientArgs),
    /// Run every built-in example into a directory.
    Reproduce,
}

fn dispatch(common: &Common, command: &Command) -> Result<Run> {
    match command {
        Command::Attractor(a) => commands::attractor(common, a),
        Command::Kameyama(a) => commands::kameyama(common, a),
        Command::Embed(a) => commands::embed(common, a),
        Command::Realize(a) => commands::realize(common, a),
        Command::Quotient(a) => commands::quotient(common, a),
        Command::Reproduce => unreachable!("handled in main"),
    }
}

struct Example {
    name: &'static str,
    args: &'static str,
    common: Common,
    command: Command,
    expect: Status,
}

fn examples(inputs: &Path) -> Vec<Example> {
    let file = |n: &str| Some(inputs.join(n));
    let with = |f: &dyn Fn(&mut Common)| {
        let mut c = Common::default();
        f(&mut c);
        c
    };
    vec![
        Example {
            name: "attractor-cantor",
            args: "attractor --ifs inputs/cantor.json --depth 8",
            common: with(&|c| c.depth = Some(8)),
            command: Command::Attractor(AttractorArgs { ifs: file("cantor.json"), size: 800.0, ..Default::default() }),
            expect: Status::Ok,
        },
        Example {
            name: "attractor-kameyama",
            args: "attractor --example kameyama --backend numeric --depth 6",
            common: with(&|c| {
                c.depth = Some(6);
                c.backend = Backend::Numeric;
            }),
            command: Command::Attractor(AttractorArgs {
                example: Some(SystemExample::Kameyama),
                size: 800.0,
                ..Default::default()
            }),
            expect: Status::Ok,
        },
        Example {
            name: "kameyama-complex",
            args: "kameyama --example kameyama --lambda 1/2 --depth 8",
            common: with(&|c| {
                c.lambda = Some("1/2".into());
                c.depth = Some(8);
            }),
            command: Command::Kameyama(KameyamaArgs { example: Some(SystemExample::Kameyama), ..Default::default() }),
            expect: Status::Ok,
        },
        Example {
            name: "kameyama-cantor",
            args: "kameyama --ifs inputs/cantor.json --lambda 1/2 --depth 6",
            common: with(&|c| {
                c.lambda = Some("1/2".into());
                c.depth = Some(6);
            }),
            command: Command::Kameyama(KameyamaArgs { ifs: file("cantor.json"), ..Default::default() }),
            expect: Status::Ok,
        },
        Example {
            name: "embed-tripod",
            args: "embed hilbert --space inputs/tripod.json",
            common: Common::default(),
            command: Command::Embed(EmbedArgs { target: Target::Hilbert, space: file("tripod.json"), example: None }),
            expect: Status::Refused,
        },
        Example {
            name: "embed-ultra",
            args: "embed line --space inputs/ultra.json --lambda 1/16 --epsilon 3/4",
            common: with(&|c| {
                c.lambda = Some("1/16".into());
                c.epsilon = Some("3/4".into());
            }),
            command: Command::Embed(EmbedArgs { target: Target::Line, space: file("ultra.json"), example: None }),
            expect: Status::Ok,
        },
        Example {
            name: "realize-desk",
            args: "realize --zspace inputs/zspace.json --y inputs/y.csv --lambda 3/4",
            common: with(&|c| c.lambda = Some("3/4".into())),
            command: Command::Realize(RealizeArgs { zspace: file("zspace.json"), y: file("y.csv"), ..Default::default() }),
            expect: Status::Ok,
        },
        Example {
            name: "quotient-cantor",
            args: "quotient --ifs inputs/cantor.json --c 0.5 --depth 8",
            common: with(&|c| c.depth = Some(8)),
            command: Command::Quotient(QuotientArgs { ifs: file("cantor.json"), example: None, c: 0.5, pairs: None }),
            expect: Status::Ok,
        },
        Example {
            name: "quotient-halves",
            args: "quotient --ifs inputs/halves.json --c 0.5 --depth 8",
            common: with(&|c| c.depth = Some(8)),
            command: Command::Quotient(QuotientArgs { ifs: file("halves.json"), example: None, c: 0.5, pairs: None }),
            expect: Status::Ok,
        },
    ]
}

fn write_inputs(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for ex in [SystemExample::Cantor, SystemExample::Halves] {
        let file: IfsFile = inputs::example_ifs_file(ex).expect("rational example");
        let name = if ex == SystemExample::Cantor { "cantor.json" } else { "halves.json" };
        fs::write(dir.join(name), pretty(&file))?;
    }
    fs::write(dir.join("tripod.json"), pretty(&inputs::example_space(SpaceExample::Tripod)))?;
    fs::write(dir.join("ultra.json"), pretty(&inputs::example_space(SpaceExample::Ultra)))?;
    fs::write(dir.join("zspace.json"), pretty(&inputs::desk_zspace()))?;
    fs::write(dir.join("y.csv"), inputs::DESK_Y)?;
    Ok(())
}

/// Writes the example inputs, runs each example into its own directory and
/// leaves `reproduce.sh` with the equivalent command lines.
fn reproduce(out: &Path) -> Result<bool> {
    let input_dir = out.join("inputs");
    write_inputs(&input_dir)?;
    let mut script = String::from("#!/bin/sh\nset -e\ncd \"$(dirname \"$0\")\"\n");
    let mut index = Vec::new();
    let mut all = true;
    for ex in examples(&input_dir) {
        let mut run = dispatch(&ex.common, &ex.command).with_context(|| ex.name)?;
        for input in &mut run.manifest.inputs {
            if let Ok(rel) = Path::new(input.as_str()).strip_prefix(out) {
                *input = rel.display().to_string();
            }
        }
        write_run(&mut run, &out.join(ex.name))?;
        let ok = run.status == ex.expect;
        all &= ok;
        println!("{} {}: {}", if ok { "ok  " } else { "FAIL" }, ex.name, run.summary);
        script.push_str(&format!("mfrac {} --out {} || test $? -eq {}\n", ex.args, ex.name, ex.expect.code()));
        index.push(json!({ "name": ex.name, "args": ex.args, "status": run.status.code(), "expected": ex.expect.code() }));
    }
    fs::write(out.join("reproduce.sh"), script)?;
    fs::write(out.join("index.json"), pretty(&index))?;
    Ok(all)
}

fn run(cli: Cli) -> Result<i32> {
    if let Command::Reproduce = cli.command {
        let out = cli.common.out.clone().unwrap_or_else(|| PathBuf::from("reproduction"));
        return Ok(if reproduce(&out)? { 0 } else { Status::Failed.code() });
    }
    let mut run = dispatch(&cli.common, &cli.command)?;
    match &cli.common.out {
        Some(dir) => {
            write_run(&mut run, dir)?;
            println!("{}", run.summary);
        }
        None => {
            print!("{}", pretty(&run.report));
            eprintln!("{}", run.summary);
        }
    }
    Ok(run.status.code())
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => process::exit(code),
        Err(e) => {
            eprintln!("mfrac: {e:#}");
            process::exit(1);
        }
    }
}
