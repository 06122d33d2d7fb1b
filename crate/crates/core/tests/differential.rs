//! Differential testing against the wasmi interpreter.
//!
//! Generates random well-typed integer programs, runs each with fully
//! concrete inputs through both this crate's engine and wasmi, and demands
//! identical results: same trap/finish outcome, same return value, same
//! final memory bytes, same final globals. With concrete inputs the
//! symbolic engine must behave exactly like a plain interpreter, so any
//! divergence is a bug on our side.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wana_core::engine::{Engine, ExploreConfig, MemCell, PathStatus};
use wana_core::loader::decode_module;
use wana_core::symbolic::{Solver, SolverConfig, SymExpr};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Ty {
    I32,
    I64,
}

/// Emits a random flat-form function body while tracking the value stack,
/// so every generated module validates.
struct Gen {
    rng: ChaCha8Rng,
    out: String,
    stack: Vec<Ty>,
}

impl Gen {
    fn new(seed: u64) -> Gen {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            out: String::new(),
            stack: Vec::new(),
        }
    }

    fn emit(&mut self, line: &str) {
        self.out.push_str("    ");
        self.out.push_str(line);
        self.out.push('\n');
    }

    fn interesting_const(&mut self, ty: Ty) -> i64 {
        match self.rng.gen_range(0..8) {
            0 => 0,
            1 => 1,
            2 => -1,
            3 => match ty {
                Ty::I32 => i32::MIN as i64,
                Ty::I64 => i64::MIN,
            },
            4 => match ty {
                Ty::I32 => i32::MAX as i64,
                Ty::I64 => i64::MAX,
            },
            5 => self.rng.gen_range(-20..20),
            _ => match ty {
                Ty::I32 => self.rng.gen::<i32>() as i64,
                Ty::I64 => self.rng.gen::<i64>(),
            },
        }
    }

    fn push_const(&mut self, ty: Ty) {
        let v = self.interesting_const(ty);
        match ty {
            Ty::I32 => self.emit(&format!("i32.const {v}")),
            Ty::I64 => self.emit(&format!("i64.const {v}")),
        }
        self.stack.push(ty);
    }

    /// Locals 0-1 are i32 params, 2-3 are i64 params, 4-5 are i32
    /// scratch, 6-7 are i64 scratch. Local 5 is reserved as the loop
    /// counter and local 4/6 as store staging, but reads are always fine.
    fn local_of(&mut self, ty: Ty) -> u32 {
        match ty {
            Ty::I32 => [0, 1, 4, 5][self.rng.gen_range(0..4)],
            Ty::I64 => [2, 3, 6, 7][self.rng.gen_range(0..4)],
        }
    }

    fn any_ty(&mut self) -> Ty {
        if self.rng.gen_bool(0.5) {
            Ty::I32
        } else {
            Ty::I64
        }
    }

    /// One net-zero statement safe to use inside if-arms and loop bodies.
    fn side_effect(&mut self) {
        match self.rng.gen_range(0..4) {
            0 => {
                let c = self.interesting_const(Ty::I32);
                self.emit("global.get 0");
                self.emit(&format!("i32.const {c}"));
                self.emit("i32.add");
                self.emit("global.set 0");
            }
            1 => {
                let c = self.interesting_const(Ty::I64);
                self.emit("global.get 1");
                self.emit(&format!("i64.const {c}"));
                self.emit("i64.xor");
                self.emit("global.set 1");
            }
            2 => {
                let c = self.interesting_const(Ty::I32);
                let src = self.rng.gen_range(0..2);
                self.emit(&format!("local.get {src}"));
                self.emit("i32.const 1016");
                self.emit("i32.and");
                self.emit(&format!("i32.const {c}"));
                self.emit("i32.store");
            }
            _ => self.emit("nop"),
        }
    }

    fn step(&mut self) {
        let top = self.stack.last().copied();
        let pair = if self.stack.len() >= 2 && self.stack[self.stack.len() - 1] == self.stack[self.stack.len() - 2]
        {
            top
        } else {
            None
        };
        match self.rng.gen_range(0..100) {
            0..=14 => {
                let ty = self.any_ty();
                self.push_const(ty);
            }
            15..=26 => {
                let ty = self.any_ty();
                let l = self.local_of(ty);
                self.emit(&format!("local.get {l}"));
                self.stack.push(ty);
            }
            27..=32 => {
                if let Some(ty) = top {
                    let l = self.local_of(ty);
                    if self.rng.gen_bool(0.5) {
                        self.emit(&format!("local.set {l}"));
                        self.stack.pop();
                    } else {
                        self.emit(&format!("local.tee {l}"));
                    }
                }
            }
            33..=36 => {
                let g = self.rng.gen_range(0..2);
                self.emit(&format!("global.get {g}"));
                self.stack.push(if g == 0 { Ty::I32 } else { Ty::I64 });
            }
            37..=39 => {
                if let Some(ty) = top {
                    let g = if ty == Ty::I32 { 0 } else { 1 };
                    self.emit(&format!("global.set {g}"));
                    self.stack.pop();
                }
            }
            40..=59 => {
                if let Some(ty) = pair {
                    let prefix = if ty == Ty::I32 { "i32" } else { "i64" };
                    let op = [
                        "add", "sub", "mul", "and", "or", "xor", "shl", "shr_s", "shr_u",
                        "rotl", "rotr", "div_s", "div_u", "rem_s", "rem_u",
                    ][self.rng.gen_range(0..15)];
                    self.emit(&format!("{prefix}.{op}"));
                    self.stack.pop();
                }
            }
            60..=67 => {
                if let Some(ty) = pair {
                    let prefix = if ty == Ty::I32 { "i32" } else { "i64" };
                    let op = ["eq", "ne", "lt_s", "lt_u", "gt_s", "gt_u", "le_s", "le_u", "ge_s", "ge_u"]
                        [self.rng.gen_range(0..10)];
                    self.emit(&format!("{prefix}.{op}"));
                    self.stack.pop();
                    self.stack.pop();
                    self.stack.push(Ty::I32);
                }
            }
            68..=73 => {
                if let Some(ty) = top {
                    let prefix = if ty == Ty::I32 { "i32" } else { "i64" };
                    match self.rng.gen_range(0..4) {
                        0 => {
                            self.emit(&format!("{prefix}.eqz"));
                            self.stack.pop();
                            self.stack.push(Ty::I32);
                        }
                        k => {
                            let op = ["clz", "ctz", "popcnt"][k - 1];
                            self.emit(&format!("{prefix}.{op}"));
                        }
                    }
                }
            }
            74..=78 => match top {
                Some(Ty::I64) => {
                    self.emit("i32.wrap_i64");
                    self.stack.pop();
                    self.stack.push(Ty::I32);
                }
                Some(Ty::I32) => {
                    let op = if self.rng.gen_bool(0.5) {
                        "i64.extend_i32_s"
                    } else {
                        "i64.extend_i32_u"
                    };
                    self.emit(op);
                    self.stack.pop();
                    self.stack.push(Ty::I64);
                }
                None => {}
            },
            79..=84 => {
                // Masked load, always in bounds.
                let ty = self.any_ty();
                let src = self.rng.gen_range(0..2);
                self.emit(&format!("local.get {src}"));
                self.emit("i32.const 1016");
                self.emit("i32.and");
                let op = match (ty, self.rng.gen_range(0..3)) {
                    (Ty::I32, 0) => "i32.load",
                    (Ty::I32, 1) => "i32.load8_u",
                    (Ty::I32, _) => "i32.load16_s",
                    (Ty::I64, 0) => "i64.load",
                    (Ty::I64, 1) => "i64.load32_u",
                    (Ty::I64, _) => "i64.load8_s",
                };
                let offset = self.rng.gen_range(0..3) * 4;
                if offset == 0 {
                    self.emit(op);
                } else {
                    self.emit(&format!("{op} offset={offset}"));
                }
                self.stack.push(ty);
            }
            85..=89 => {
                // Masked store of the top value via a staging local.
                if let Some(ty) = top {
                    let (stage, store) = match ty {
                        Ty::I32 => (4, ["i32.store", "i32.store8", "i32.store16"][self.rng.gen_range(0..3)]),
                        Ty::I64 => (6, ["i64.store", "i64.store32", "i64.store16"][self.rng.gen_range(0..3)]),
                    };
                    let src = self.rng.gen_range(0..2);
                    self.emit(&format!("local.set {stage}"));
                    self.emit(&format!("local.get {src}"));
                    self.emit("i32.const 1016");
                    self.emit("i32.and");
                    self.emit(&format!("local.get {stage}"));
                    self.emit(store);
                    self.stack.pop();
                }
            }
            90..=93 => {
                // Conditional: either a statement form or an expression form.
                if top == Some(Ty::I32) {
                    self.stack.pop();
                    if self.rng.gen_bool(0.5) {
                        self.emit("if");
                        self.side_effect();
                        self.emit("else");
                        self.side_effect();
                        self.emit("end");
                    } else {
                        let a = self.interesting_const(Ty::I32);
                        let b = self.interesting_const(Ty::I32);
                        self.emit("if (result i32)");
                        self.emit(&format!("i32.const {a}"));
                        self.emit("else");
                        self.emit(&format!("i32.const {b}"));
                        self.emit("end");
                        self.stack.push(Ty::I32);
                    }
                }
            }
            94..=96 => {
                // Bounded counting loop over local 5 with side effects.
                let trips = self.rng.gen_range(2..=8);
                self.emit("i32.const 0");
                self.emit("local.set 5");
                self.emit("loop");
                self.side_effect();
                self.emit("local.get 5");
                self.emit("i32.const 1");
                self.emit("i32.add");
                self.emit("local.tee 5");
                self.emit(&format!("i32.const {trips}"));
                self.emit("i32.lt_u");
                self.emit("br_if 0");
                self.emit("end");
            }
            97 => {
                if self.stack.len() >= 3
                    && top == Some(Ty::I32)
                    && self.stack[self.stack.len() - 2] == self.stack[self.stack.len() - 3]
                {
                    self.emit("select");
                    self.stack.pop();
                    self.stack.pop();
                }
            }
            _ => {
                if top.is_some() && self.stack.len() > 1 {
                    self.emit("drop");
                    self.stack.pop();
                }
            }
        }
    }

    fn finish(&mut self) {
        while self.stack.len() > 1 {
            self.emit("drop");
            self.stack.pop();
        }
        match self.stack.pop() {
            None => self.emit("i64.const 0"),
            Some(Ty::I32) => self.emit("i64.extend_i32_u"),
            Some(Ty::I64) => {}
        }
    }

    fn module(mut self, ops: usize) -> String {
        for _ in 0..ops {
            self.step();
        }
        self.finish();
        format!(
            "(module\n\
             \x20 (memory (export \"memory\") 1)\n\
             \x20 (global $g0 (export \"g0\") (mut i32) (i32.const 11))\n\
             \x20 (global $g1 (export \"g1\") (mut i64) (i64.const -7))\n\
             \x20 (func (export \"run\") (param i32 i32 i64 i64) (result i64)\n\
             \x20   (local i32 i32 i64 i64)\n{}  ))",
            self.out
        )
    }
}

struct WasmiRun {
    outcome: Result<i64, String>,
    memory: Vec<u8>,
    g0: i32,
    g1: i64,
}

fn run_wasmi(bytes: &[u8], args: (i32, i32, i64, i64)) -> WasmiRun {
    let engine = wasmi::Engine::default();
    let module = wasmi::Module::new(&engine, bytes).expect("wasmi accepts the module");
    let mut store = wasmi::Store::new(&engine, ());
    let linker = wasmi::Linker::<()>::new(&engine);
    let instance = linker
        .instantiate(&mut store, &module)
        .expect("wasmi instantiates")
        .start(&mut store)
        .expect("no start section");
    let func = instance
        .get_typed_func::<(i32, i32, i64, i64), i64>(&store, "run")
        .expect("run export");
    let outcome = func
        .call(&mut store, args)
        .map_err(|e| e.to_string());
    let memory = instance
        .get_memory(&store, "memory")
        .expect("memory export")
        .data(&store)[..2048]
        .to_vec();
    let get = |name: &str| {
        instance
            .get_global(&store, name)
            .expect("global export")
            .get(&store)
    };
    let g0 = match get("g0") {
        wasmi::Value::I32(v) => v,
        other => panic!("g0 has wrong type: {other:?}"),
    };
    let g1 = match get("g1") {
        wasmi::Value::I64(v) => v,
        other => panic!("g1 has wrong type: {other:?}"),
    };
    WasmiRun {
        outcome,
        memory,
        g0,
        g1,
    }
}

fn concrete_byte(cell: &MemCell, addr: usize, seed: u64) -> u8 {
    match cell {
        MemCell::Concrete(b) => *b,
        MemCell::Slice { .. } => {
            panic!("seed {seed}: symbolic byte at {addr} in a concrete run")
        }
    }
}

#[test]
fn concrete_execution_matches_wasmi_on_generated_programs() {
    let mut finished = 0u32;
    let mut trapped = 0u32;
    let mut retired = 0u64;
    for i in 0..140u64 {
        let seed = 0xD1FF_0000 + i;
        let src = Gen::new(seed).module(26);
        let bytes = wat::parse_str(&src)
            .unwrap_or_else(|e| panic!("seed {seed}: generated text rejected: {e}\n{src}"));

        let mut arg_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
        let args = (
            arg_rng.gen::<i32>(),
            arg_rng.gen::<i32>(),
            arg_rng.gen::<i64>(),
            arg_rng.gen::<i64>(),
        );
        let reference = run_wasmi(&bytes, args);

        let module = decode_module(&bytes)
            .unwrap_or_else(|e| panic!("seed {seed}: decode failed: {e}"));
        let engine = Engine::new(
            &module,
            ExploreConfig::default(),
            Solver::new(SolverConfig::default()),
        );
        let state = engine.instantiate().expect("instantiates");
        let entry = module.export_lookup("run").expect("run export");
        let sym_args = vec![
            SymExpr::concrete(args.0 as u32 as u64, 32),
            SymExpr::concrete(args.1 as u32 as u64, 32),
            SymExpr::concrete(args.2 as u64, 64),
            SymExpr::concrete(args.3 as u64, 64),
        ];
        let out = engine
            .run(state, entry, sym_args)
            .unwrap_or_else(|e| panic!("seed {seed}: exploration failed: {e}"));

        assert_eq!(
            out.paths.len(),
            1,
            "seed {seed}: concrete input must yield exactly one path\n{src}"
        );
        let path = &out.paths[0];
        retired += path.instructions_retired;
        match (&reference.outcome, path.status) {
            (Ok(v), PathStatus::Finished) => {
                finished += 1;
                assert_eq!(path.stack.len(), 1, "seed {seed}: result arity");
                assert_eq!(
                    path.stack[0].as_concrete(),
                    Some(*v as u64),
                    "seed {seed}: result mismatch\n{src}"
                );
            }
            (Err(_), PathStatus::Trapped) => {
                trapped += 1;
            }
            (expected, got) => panic!(
                "seed {seed}: outcome mismatch: wasmi {expected:?} vs engine {got:?} ({:?})\n{src}",
                path.diagnostic
            ),
        }

        for addr in 0..2048usize {
            let ours = concrete_byte(&path.memory.cell(addr as u64), addr, seed);
            assert_eq!(
                ours, reference.memory[addr],
                "seed {seed}: memory byte {addr} diverged\n{src}"
            );
        }
        assert_eq!(
            path.globals[0].as_concrete(),
            Some(reference.g0 as u32 as u64),
            "seed {seed}: global g0 diverged\n{src}"
        );
        assert_eq!(
            path.globals[1].as_concrete(),
            Some(reference.g1 as u64),
            "seed {seed}: global g1 diverged\n{src}"
        );
    }
    // The corpus must exercise both outcomes and real instruction volume,
    // otherwise agreement with the reference proves nothing.
    assert!(finished >= 30, "only {finished} programs finished");
    assert!(trapped >= 10, "only {trapped} programs trapped");
    assert!(
        retired / 140 >= 25,
        "generated programs are too short: {} instructions average",
        retired / 140
    );
}

/// Same harness, pinned to hand-picked programs that once looked risky:
/// division edge cases, shift masking, and sub-word store/load mixes.
#[test]
fn concrete_execution_matches_wasmi_on_edge_programs() {
    let programs: &[&str] = &[
        // INT_MIN remainders and quotients by -1 and 0 behind a guard.
        r#"(module
          (memory (export "memory") 1)
          (global $g0 (export "g0") (mut i32) (i32.const 0))
          (global $g1 (export "g1") (mut i64) (i64.const 0))
          (func (export "run") (param i32 i32 i64 i64) (result i64)
            (local i32 i32 i64 i64)
            i32.const 0x80000000
            i32.const -1
            i32.rem_s
            i64.extend_i32_s
            i64.const -9223372036854775808
            i64.const -1
            i64.rem_s
            i64.add))"#,
        // Shift counts beyond the width are masked.
        r#"(module
          (memory (export "memory") 1)
          (global $g0 (export "g0") (mut i32) (i32.const 0))
          (global $g1 (export "g1") (mut i64) (i64.const 0))
          (func (export "run") (param i32 i32 i64 i64) (result i64)
            (local i32 i32 i64 i64)
            i32.const 1
            i32.const 37
            i32.shl
            i64.extend_i32_u
            i64.const 1
            i64.const 70
            i64.shl
            i64.add))"#,
        // Sub-word stores overlap a wide load.
        r#"(module
          (memory (export "memory") 1)
          (global $g0 (export "g0") (mut i32) (i32.const 0))
          (global $g1 (export "g1") (mut i64) (i64.const 0))
          (func (export "run") (param i32 i32 i64 i64) (result i64)
            (local i32 i32 i64 i64)
            i32.const 100
            i32.const -2
            i32.store
            i32.const 102
            i32.const 0x7b
            i32.store8
            i32.const 98
            i64.load
            ))"#,
        // Signed narrow loads sign-extend.
        r#"(module
          (memory (export "memory") 1)
          (global $g0 (export "g0") (mut i32) (i32.const 0))
          (global $g1 (export "g1") (mut i64) (i64.const 0))
          (func (export "run") (param i32 i32 i64 i64) (result i64)
            (local i32 i32 i64 i64)
            i32.const 8
            i32.const 0x8081
            i32.store16
            i32.const 8
            i32.load16_s
            i64.extend_i32_s
            i32.const 8
            i32.load8_s
            i64.extend_i32_s
            i64.xor))"#,
    ];
    for (i, src) in programs.iter().enumerate() {
        let bytes = wat::parse_str(src).expect("edge program compiles");
        let args = (3, -5, 1 << 40, -9);
        let reference = run_wasmi(&bytes, args);
        let module = decode_module(&bytes).expect("decodes");
        let engine = Engine::new(
            &module,
            ExploreConfig::default(),
            Solver::new(SolverConfig::default()),
        );
        let state = engine.instantiate().expect("instantiates");
        let entry = module.export_lookup("run").expect("run export");
        let sym_args = vec![
            SymExpr::concrete(args.0 as u32 as u64, 32),
            SymExpr::concrete(args.1 as u32 as u64, 32),
            SymExpr::concrete(args.2 as u64, 64),
            SymExpr::concrete(args.3 as u64, 64),
        ];
        let out = engine.run(state, entry, sym_args).expect("explores");
        assert_eq!(out.paths.len(), 1);
        let path = &out.paths[0];
        match (&reference.outcome, path.status) {
            (Ok(v), PathStatus::Finished) => {
                assert_eq!(path.stack[0].as_concrete(), Some(*v as u64), "program {i}");
            }
            (Err(_), PathStatus::Trapped) => {}
            (expected, got) => panic!("program {i}: wasmi {expected:?} vs engine {got:?}"),
        }
        for addr in 0..256usize {
            assert_eq!(
                concrete_byte(&path.memory.cell(addr as u64), addr, i as u64),
                reference.memory[addr],
                "program {i}: byte {addr}"
            );
        }
    }
}
