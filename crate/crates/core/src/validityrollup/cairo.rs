//! An algebraic register machine over a prime field with write-once memory.
//!
//! The deterministic machine checks a full trace `(T, m, S)` against a total
//! memory. The nondeterministic machine accepts public input
//! `(T, m*, pc_I, pc_F, ap_I, ap_F)` when some total extension `m` of `m*` and
//! some states `S` make the deterministic machine accept. The runner builds
//! such a witness, calling prover-side hints for cells the program does not
//! determine.
//!
//! Instruction word layout, little end first: three 16-bit offsets biased by
//! `2^15` (dst, op0, op1), then `dst_fp`, `op0_fp`, a 2-bit op1 source
//! (0 = ap, 1 = fp, 2 = immediate at `pc + 1`), `ap++`, and a 3-bit opcode.
//! There is no comparison instruction; only equality is asserted.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ValidityError;
use crate::algebra::{Field, FieldElement};
use crate::primitives::{keccak_concat, B256};

const OFFSET_BIAS: i64 = 1 << 15;
const WORD_BITS: u32 = 56;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Opcode {
    /// `[dst] = [op1]`
    AssertEq = 0,
    /// `[dst] = [op0] + [op1]`
    AssertAdd = 1,
    /// `[dst] = [op0] * [op1]`
    AssertMul = 2,
    /// `pc += [op1]`
    Jmp = 3,
    /// `pc += [op1]` if `[dst] != 0`
    Jnz = 4,
    /// Pushes `fp` and the return pc, then `fp = ap + 2` and `pc += [op1]`.
    Call = 5,
    /// `pc = [fp - 1]`, `fp = [fp - 2]`
    Ret = 6,
    /// `ap += [op1]`
    AdvanceAp = 7,
}

impl Opcode {
    fn from_bits(b: u64) -> Opcode {
        match b {
            0 => Opcode::AssertEq,
            1 => Opcode::AssertAdd,
            2 => Opcode::AssertMul,
            3 => Opcode::Jmp,
            4 => Opcode::Jnz,
            5 => Opcode::Call,
            6 => Opcode::Ret,
            _ => Opcode::AdvanceAp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reg {
    Ap,
    Fp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op1 {
    Reg(Reg),
    Imm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CairoInstruction {
    pub opcode: Opcode,
    pub dst: (Reg, i16),
    pub op0: (Reg, i16),
    pub op1: (Op1, i16),
    pub ap_inc: bool,
}

fn bias(off: i16) -> u64 {
    (off as i64 + OFFSET_BIAS) as u64
}

fn unbias(raw: u64) -> i16 {
    (raw as i64 - OFFSET_BIAS) as i16
}

fn reg_bit(r: Reg) -> u64 {
    match r {
        Reg::Ap => 0,
        Reg::Fp => 1,
    }
}

fn bit_reg(b: u64) -> Reg {
    if b == 0 {
        Reg::Ap
    } else {
        Reg::Fp
    }
}

impl CairoInstruction {
    pub fn new(opcode: Opcode) -> Self {
        Self { opcode, dst: (Reg::Ap, 0), op0: (Reg::Ap, 0), op1: (Op1::Reg(Reg::Ap), 0), ap_inc: false }
    }

    pub fn dst(mut self, r: Reg, off: i16) -> Self {
        self.dst = (r, off);
        self
    }

    pub fn op0(mut self, r: Reg, off: i16) -> Self {
        self.op0 = (r, off);
        self
    }

    pub fn op1(mut self, r: Reg, off: i16) -> Self {
        self.op1 = (Op1::Reg(r), off);
        self
    }

    pub fn imm(mut self) -> Self {
        self.op1 = (Op1::Imm, 1);
        self
    }

    pub fn ap_inc(mut self) -> Self {
        self.ap_inc = true;
        self
    }

    /// Words occupied in memory, including the immediate.
    pub fn size(&self) -> u64 {
        if self.op1.0 == Op1::Imm {
            2
        } else {
            1
        }
    }

    pub fn encode(&self) -> u64 {
        let src = match self.op1.0 {
            Op1::Reg(r) => reg_bit(r),
            Op1::Imm => 2,
        };
        let off1 = if self.op1.0 == Op1::Imm { 1 } else { self.op1.1 };
        bias(self.dst.1)
            | bias(self.op0.1) << 16
            | bias(off1) << 32
            | reg_bit(self.dst.0) << 48
            | reg_bit(self.op0.0) << 49
            | src << 50
            | (self.ap_inc as u64) << 52
            | (self.opcode as u64) << 53
    }

    pub fn decode(word: u64) -> Result<Self, ValidityError> {
        let bad = || ValidityError::InvalidInstruction(word);
        if word >> WORD_BITS != 0 {
            return Err(bad());
        }
        let field = |shift: u32, bits: u32| (word >> shift) & ((1 << bits) - 1);
        let op1 = match field(50, 2) {
            0 => (Op1::Reg(Reg::Ap), unbias(field(32, 16))),
            1 => (Op1::Reg(Reg::Fp), unbias(field(32, 16))),
            2 if field(32, 16) == bias(1) => (Op1::Imm, 1),
            _ => return Err(bad()),
        };
        let ins = CairoInstruction {
            opcode: Opcode::from_bits(field(53, 3)),
            dst: (bit_reg(field(48, 1)), unbias(field(0, 16))),
            op0: (bit_reg(field(49, 1)), unbias(field(16, 16))),
            op1,
            ap_inc: field(52, 1) == 1,
        };
        if ins.ap_inc && matches!(ins.opcode, Opcode::Call | Opcode::Ret | Opcode::AdvanceAp) {
            return Err(bad());
        }
        Ok(ins)
    }
}

/// Registers of one machine state; all three are field elements.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct CairoState {
    pub pc: FieldElement,
    pub ap: FieldElement,
    pub fp: FieldElement,
}

impl fmt::Debug for CairoState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(pc={}, ap={}, fp={})", self.pc.value(), self.ap.value(), self.fp.value())
    }
}

/// Write-once map from field addresses to field values.
#[derive(Clone, PartialEq, Eq)]
pub struct PartialMemory {
    field: Field,
    cells: BTreeMap<u64, FieldElement>,
}

impl fmt::Debug for PartialMemory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.cells.iter().map(|(a, v)| (a, v.value()))).finish()
    }
}

impl PartialMemory {
    pub fn new(field: Field) -> Self {
        Self { field, cells: BTreeMap::new() }
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn get(&self, addr: FieldElement) -> Option<FieldElement> {
        self.cells.get(&addr.value()).copied()
    }

    /// Undefined cells of the total extension read as zero.
    pub fn get_or_zero(&self, addr: FieldElement) -> FieldElement {
        self.get(addr).unwrap_or(self.field.zero())
    }

    pub fn write(&mut self, addr: FieldElement, value: FieldElement) -> Result<(), ValidityError> {
        match self.cells.get(&addr.value()) {
            Some(v) if *v != value => Err(ValidityError::MemoryContradiction { addr: addr.value() }),
            Some(_) => Ok(()),
            None => {
                self.cells.insert(addr.value(), value);
                Ok(())
            }
        }
    }

    /// Overwrites without the write-once check; for building mutated traces.
    pub fn force(&mut self, addr: FieldElement, value: FieldElement) {
        self.cells.insert(addr.value(), value);
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (FieldElement, FieldElement)> + '_ {
        self.cells.iter().map(|(a, v)| (self.field.elem(*a), *v))
    }

    /// Whether `self` agrees with every cell of `other`.
    pub fn extends(&self, other: &PartialMemory) -> bool {
        other.cells.iter().all(|(a, v)| self.cells.get(a) == Some(v))
    }
}

fn base(r: Reg, s: &CairoState) -> FieldElement {
    match r {
        Reg::Ap => s.ap,
        Reg::Fp => s.fp,
    }
}

fn offset(f: Field, addr: FieldElement, off: i16) -> FieldElement {
    addr + f.from_i64(off as i64)
}

struct Operands {
    dst: FieldElement,
    op0: FieldElement,
    op1: FieldElement,
}

fn operand_addrs(f: Field, ins: &CairoInstruction, s: &CairoState) -> Operands {
    let op1 = match ins.op1.0 {
        Op1::Imm => s.pc + f.one(),
        Op1::Reg(r) => offset(f, base(r, s), ins.op1.1),
    };
    Operands { dst: offset(f, base(ins.dst.0, s), ins.dst.1), op0: offset(f, base(ins.op0.0, s), ins.op0.1), op1 }
}

fn fetch(memory: &PartialMemory, s: &CairoState) -> Result<CairoInstruction, ValidityError> {
    let word = memory.get(s.pc).ok_or(ValidityError::InvalidAccess { addr: s.pc.value() })?;
    let ins = CairoInstruction::decode(word.value())?;
    if ins.op1.0 == Op1::Imm && memory.get(s.pc + memory.field.one()).is_none() {
        return Err(ValidityError::InvalidAccess { addr: (s.pc + memory.field.one()).value() });
    }
    Ok(ins)
}

/// Whether the instruction at `memory[s.pc]` maps `s` to `next`; memory is
/// read only and undefined operand cells read as zero.
pub fn cairo_step_valid(s: &CairoState, next: &CairoState, memory: &PartialMemory) -> Result<bool, ValidityError> {
    let f = memory.field;
    let ins = fetch(memory, s)?;
    let a = operand_addrs(f, &ins, s);
    let m = |x: FieldElement| memory.get_or_zero(x);
    let size = f.elem(ins.size());
    let ap_next = if ins.ap_inc { s.ap + f.one() } else { s.ap };
    let expected = match ins.opcode {
        Opcode::AssertEq | Opcode::AssertAdd | Opcode::AssertMul => {
            let rhs = match ins.opcode {
                Opcode::AssertEq => m(a.op1),
                Opcode::AssertAdd => m(a.op0) + m(a.op1),
                _ => m(a.op0) * m(a.op1),
            };
            if m(a.dst) != rhs {
                return Ok(false);
            }
            CairoState { pc: s.pc + size, ap: ap_next, fp: s.fp }
        }
        Opcode::Jmp => CairoState { pc: s.pc + m(a.op1), ap: ap_next, fp: s.fp },
        Opcode::Jnz => {
            let pc = if m(a.dst).is_zero() { s.pc + size } else { s.pc + m(a.op1) };
            CairoState { pc, ap: ap_next, fp: s.fp }
        }
        Opcode::Call => {
            if m(s.ap) != s.fp || m(s.ap + f.one()) != s.pc + size {
                return Ok(false);
            }
            let two = f.elem(2);
            CairoState { pc: s.pc + m(a.op1), ap: s.ap + two, fp: s.ap + two }
        }
        Opcode::Ret => CairoState { pc: m(s.fp - f.one()), ap: s.ap, fp: m(s.fp - f.elem(2)) },
        Opcode::AdvanceAp => CairoState { pc: s.pc + size, ap: s.ap + m(a.op1), fp: s.fp },
    };
    Ok(expected == *next)
}

/// Accepts iff `states` has `steps + 1` entries and each consecutive pair is
/// a valid step.
pub fn deterministic_accept(steps: u64, memory: &PartialMemory, states: &[CairoState]) -> bool {
    if states.len() as u64 != steps + 1 {
        return false;
    }
    states.windows(2).all(|w| cairo_step_valid(&w[0], &w[1], memory).unwrap_or(false))
}

/// Input of the nondeterministic machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicInput {
    pub steps: u64,
    pub memory: PartialMemory,
    pub pc_initial: FieldElement,
    pub pc_final: FieldElement,
    pub ap_initial: FieldElement,
    pub ap_final: FieldElement,
}

/// Checks a claimed witness `(memory, states)` for `public`.
pub fn nondeterministic_accept(public: &PublicInput, memory: &PartialMemory, states: &[CairoState]) -> bool {
    let (Some(first), Some(last)) = (states.first(), states.last()) else {
        return false;
    };
    first.pc == public.pc_initial
        && first.ap == public.ap_initial
        && last.pc == public.pc_final
        && last.ap == public.ap_final
        && memory.extends(&public.memory)
        && deterministic_accept(public.steps, memory, states)
}

/// What a hint can see and fill in.
pub struct HintContext<'a> {
    pub state: CairoState,
    pub memory: &'a mut PartialMemory,
}

impl HintContext<'_> {
    pub fn ap_rel(&self, off: i64) -> FieldElement {
        self.state.ap + self.memory.field.from_i64(off)
    }

    pub fn fp_rel(&self, off: i64) -> FieldElement {
        self.state.fp + self.memory.field.from_i64(off)
    }
}

/// Prover-side procedure; never part of the proven statement.
pub type Hint = Arc<dyn Fn(&mut HintContext<'_>) -> Result<(), ValidityError> + Send + Sync>;

#[derive(Clone)]
pub struct CairoProgram {
    pub bytecode: Vec<FieldElement>,
    pub prog_start: usize,
    pub prog_end: usize,
    /// Keyed by pc offset from the program base; run before the instruction.
    pub hints: BTreeMap<usize, Hint>,
}

impl fmt::Debug for CairoProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CairoProgram")
            .field("bytecode", &self.bytecode.iter().map(|b| b.value()).collect::<Vec<_>>())
            .field("prog_start", &self.prog_start)
            .field("prog_end", &self.prog_end)
            .field("hints", &self.hints.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl CairoProgram {
    pub fn new(bytecode: Vec<FieldElement>, prog_start: usize, prog_end: usize) -> Result<Self, ValidityError> {
        if prog_start > bytecode.len() || prog_end > bytecode.len() {
            return Err(ValidityError::BadProgramBounds { start: prog_start, end: prog_end, len: bytecode.len() });
        }
        Ok(Self { bytecode, prog_start, prog_end, hints: BTreeMap::new() })
    }

    pub fn with_hint(mut self, pc_offset: usize, hint: Hint) -> Self {
        self.hints.insert(pc_offset, hint);
        self
    }

    pub fn drop_hints(mut self) -> Self {
        self.hints.clear();
        self
    }
}

/// Assembles a straight list of instructions and immediates.
#[derive(Debug, Clone, Default)]
pub struct Assembler {
    words: Vec<u64>,
    imms: Vec<(usize, i128)>,
}

impl Assembler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pc(&self) -> usize {
        self.words.len()
    }

    pub fn ins(mut self, ins: CairoInstruction) -> Self {
        self.words.push(ins.encode());
        self
    }

    pub fn ins_imm(mut self, ins: CairoInstruction, imm: i128) -> Self {
        self.words.push(ins.imm().encode());
        self.imms.push((self.words.len(), imm));
        self.words.push(0);
        self
    }

    pub fn finish(self, field: Field) -> Vec<FieldElement> {
        let mut out: Vec<FieldElement> = self.words.iter().map(|w| field.elem(*w)).collect();
        for (i, v) in self.imms {
            out[i] = field.from_i128(v);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub steps: u64,
    pub memory: PartialMemory,
    pub states: Vec<CairoState>,
}

impl ExecutionTrace {
    pub fn accepted(&self) -> bool {
        deterministic_accept(self.steps, &self.memory, &self.states)
    }

    /// Commitment to every memory cell and state.
    pub fn digest(&self) -> B256 {
        let mut bytes = Vec::with_capacity(16 * self.memory.len() + 24 * self.states.len() + 8);
        bytes.extend(self.steps.to_be_bytes());
        for (a, v) in self.memory.iter() {
            bytes.extend(a.value().to_be_bytes());
            bytes.extend(v.value().to_be_bytes());
        }
        for s in &self.states {
            for r in [s.pc, s.ap, s.fp] {
                bytes.extend(r.value().to_be_bytes());
            }
        }
        keccak_concat([bytes.as_slice()])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutput {
    pub trace: ExecutionTrace,
    pub public: PublicInput,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub prog_base: u64,
    /// Initial `ap`; `fp` starts equal to it.
    pub ap_initial: u64,
    /// Public cells besides the bytecode.
    pub inputs: Vec<(u64, FieldElement)>,
    pub max_steps: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { prog_base: 0, ap_initial: 100, inputs: Vec::new(), max_steps: 1 << 20 }
    }
}

enum Cell {
    Known(FieldElement),
    Unknown(FieldElement),
}

fn cell(memory: &PartialMemory, addr: FieldElement) -> Cell {
    match memory.get(addr) {
        Some(v) => Cell::Known(v),
        None => Cell::Unknown(addr),
    }
}

fn need(memory: &PartialMemory, addr: FieldElement, pc: FieldElement) -> Result<FieldElement, ValidityError> {
    memory.get(addr).ok_or(ValidityError::InsufficientHints { pc: pc.value() })
}

/// Executes one instruction, deducing the single unknown cell of an
/// assertion where the operation can be inverted.
fn execute(memory: &mut PartialMemory, s: &CairoState) -> Result<CairoState, ValidityError> {
    let f = memory.field;
    let ins = fetch(memory, s)?;
    let a = operand_addrs(f, &ins, s);
    let size = f.elem(ins.size());
    let ap_next = if ins.ap_inc { s.ap + f.one() } else { s.ap };
    let starved = ValidityError::InsufficientHints { pc: s.pc.value() };
    match ins.opcode {
        Opcode::AssertEq => {
            match (cell(memory, a.dst), cell(memory, a.op1)) {
                (Cell::Known(d), Cell::Known(v)) if d != v => return Err(ValidityError::MemoryContradiction { addr: a.dst.value() }),
                (Cell::Known(_), Cell::Known(_)) => {}
                (Cell::Unknown(d), Cell::Known(v)) => memory.write(d, v)?,
                (Cell::Known(v), Cell::Unknown(x)) => memory.write(x, v)?,
                _ => return Err(starved),
            }
            Ok(CairoState { pc: s.pc + size, ap: ap_next, fp: s.fp })
        }
        Opcode::AssertAdd | Opcode::AssertMul => {
            let add = ins.opcode == Opcode::AssertAdd;
            let apply = |x: FieldElement, y: FieldElement| if add { x + y } else { x * y };
            let same_operand = a.op0 == a.op1;
            match (cell(memory, a.dst), cell(memory, a.op0), cell(memory, a.op1)) {
                (Cell::Known(d), Cell::Known(x), Cell::Known(y)) => {
                    if d != apply(x, y) {
                        return Err(ValidityError::MemoryContradiction { addr: a.dst.value() });
                    }
                }
                (Cell::Unknown(d), Cell::Known(x), Cell::Known(y)) => memory.write(d, apply(x, y))?,
                (Cell::Known(d), Cell::Known(x), Cell::Unknown(u)) | (Cell::Known(d), Cell::Unknown(u), Cell::Known(x)) if !same_operand => {
                    let v = if add { d - x } else { d.checked_div(x).map_err(|_| starved.clone())? };
                    memory.write(u, v)?;
                }
                _ => return Err(starved),
            }
            Ok(CairoState { pc: s.pc + size, ap: ap_next, fp: s.fp })
        }
        Opcode::Jmp => Ok(CairoState { pc: s.pc + need(memory, a.op1, s.pc)?, ap: ap_next, fp: s.fp }),
        Opcode::Jnz => {
            let pc = if need(memory, a.dst, s.pc)?.is_zero() { s.pc + size } else { s.pc + need(memory, a.op1, s.pc)? };
            Ok(CairoState { pc, ap: ap_next, fp: s.fp })
        }
        Opcode::Call => {
            let jump = need(memory, a.op1, s.pc)?;
            memory.write(s.ap, s.fp)?;
            memory.write(s.ap + f.one(), s.pc + size)?;
            let two = f.elem(2);
            Ok(CairoState { pc: s.pc + jump, ap: s.ap + two, fp: s.ap + two })
        }
        Opcode::Ret => Ok(CairoState {
            pc: need(memory, s.fp - f.one(), s.pc)?,
            ap: s.ap,
            fp: need(memory, s.fp - f.elem(2), s.pc)?,
        }),
        Opcode::AdvanceAp => Ok(CairoState { pc: s.pc + size, ap: s.ap + need(memory, a.op1, s.pc)?, fp: s.fp }),
    }
}

/// Loads the bytecode at `prog_base`, runs from `prog_base + prog_start`
/// until `pc = prog_base + prog_end`, and returns the deterministic witness
/// with its public input.
pub fn run_program(program: &CairoProgram, field: Field, cfg: &RunConfig) -> Result<RunOutput, ValidityError> {
    let mut public = PartialMemory::new(field);
    let base = field.elem(cfg.prog_base);
    for (i, w) in program.bytecode.iter().enumerate() {
        public.write(base + field.elem(i as u64), *w)?;
    }
    for (addr, v) in &cfg.inputs {
        public.write(field.elem(*addr), *v)?;
    }
    let mut memory = public.clone();
    let ap = field.elem(cfg.ap_initial);
    let pc_initial = base + field.elem(program.prog_start as u64);
    let pc_final = base + field.elem(program.prog_end as u64);
    let mut s = CairoState { pc: pc_initial, ap, fp: ap };
    let mut states = vec![s];
    while s.pc != pc_final {
        if states.len() as u64 > cfg.max_steps {
            return Err(ValidityError::StepLimit(cfg.max_steps));
        }
        let off = (s.pc - base).value();
        if let Some(hint) = usize::try_from(off).ok().and_then(|o| program.hints.get(&o)) {
            hint(&mut HintContext { state: s, memory: &mut memory })?;
        }
        s = execute(&mut memory, &s)?;
        states.push(s);
    }
    let steps = states.len() as u64 - 1;
    let trace = ExecutionTrace { steps, memory, states };
    let public = PublicInput { steps, memory: public, pc_initial, pc_final, ap_initial: ap, ap_final: s.ap };
    Ok(RunOutput { trace, public })
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// `[ap] = 25; ap++` then `[ap - 1] = [ap] * [ap]; ap++`. The second cell is
/// guessed by a hint; without it the runner cannot proceed.
pub fn sqrt_program(field: Field, square: u64) -> CairoProgram {
    let bytecode = Assembler::new()
        .ins_imm(CairoInstruction::new(Opcode::AssertEq).dst(Reg::Ap, 0).ap_inc(), square as i128)
        .ins(CairoInstruction::new(Opcode::AssertMul).dst(Reg::Ap, -1).op0(Reg::Ap, 0).op1(Reg::Ap, 0).ap_inc())
        .finish(field);
    let end = bytecode.len();
    CairoProgram::new(bytecode, 0, end).expect("bounds").with_hint(2, sqrt_hint(false))
}

/// Writes `isqrt([ap - 1])` to `[ap]`, or its negation.
pub fn sqrt_hint(negate: bool) -> Hint {
    Arc::new(move |ctx: &mut HintContext<'_>| {
        let field = ctx.memory.field();
        let top = ctx.ap_rel(-1);
        let v = ctx.memory.get(top).ok_or(ValidityError::InsufficientHints { pc: ctx.state.pc.value() })?;
        let r = field.elem(isqrt(v.value()));
        ctx.memory.write(ctx.ap_rel(0), if negate { -r } else { r })
    })
}

/// One storage cell moving from `old` to `new`, both reduced into the field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellUpdate {
    pub old: FieldElement,
    pub new: FieldElement,
}

/// Per update: `[ap] = old; ap++`, `[ap] = new; ap++`, `[ap - 1] = [ap - 2] + [ap]; ap++`.
/// The runner deduces the delta cell, so update `i` leaves `new` at
/// `ap_I + 3i + 1`.
pub fn transition_program(field: Field, updates: &[CellUpdate]) -> CairoProgram {
    let mut asm = Assembler::new();
    let add = CairoInstruction::new(Opcode::AssertAdd).dst(Reg::Ap, -1).op0(Reg::Ap, -2).op1(Reg::Ap, 0).ap_inc();
    for u in updates {
        let load = CairoInstruction::new(Opcode::AssertEq).dst(Reg::Ap, 0).ap_inc();
        asm = asm.ins_imm(load, u.old.value() as i128).ins_imm(load, u.new.value() as i128).ins(add);
    }
    let bytecode = asm.finish(field);
    let end = bytecode.len();
    CairoProgram::new(bytecode, 0, end).expect("bounds")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn f() -> Field {
        Field::default()
    }

    fn run(p: &CairoProgram) -> Result<RunOutput, ValidityError> {
        run_program(p, f(), &RunConfig::default())
    }

    #[test]
    fn sqrt_with_hint() {
        let out = run(&sqrt_program(f(), 25)).unwrap();
        let t = &out.trace;
        assert_eq!(t.steps, 2);
        let ap = t.states[1].ap;
        assert_eq!(t.memory.get(ap), Some(f().elem(5)));
        assert!(t.accepted());
        assert!(nondeterministic_accept(&out.public, &t.memory, &t.states));
        assert_eq!(out.public.pc_final, f().elem(3));
        assert_eq!(out.public.ap_final, f().elem(102));
    }

    #[test]
    fn negated_root_is_also_accepted() {
        let p = sqrt_program(f(), 25).with_hint(2, sqrt_hint(true));
        let out = run(&p).unwrap();
        assert_eq!(out.trace.memory.get(out.trace.states[1].ap), Some(-f().elem(5)));
        assert!(out.trace.accepted());
    }

    #[test]
    fn sqrt_without_hint() {
        assert!(matches!(run(&sqrt_program(f(), 25).drop_hints()), Err(ValidityError::InsufficientHints { pc: 2 })));
    }

    #[test]
    fn contradiction() {
        let bytecode = Assembler::new()
            .ins_imm(CairoInstruction::new(Opcode::AssertEq).dst(Reg::Ap, 0), 3)
            .ins_imm(CairoInstruction::new(Opcode::AssertEq).dst(Reg::Ap, 0), 4)
            .finish(f());
        let p = CairoProgram::new(bytecode, 0, 4).unwrap();
        assert_eq!(run(&p), Err(ValidityError::MemoryContradiction { addr: 100 }));
        let mut m = PartialMemory::new(f());
        m.write(f().elem(1), f().elem(2)).unwrap();
        m.write(f().elem(1), f().elem(2)).unwrap();
        assert!(m.write(f().elem(1), f().elem(3)).is_err());
    }

    #[test]
    fn step_validity_examples() {
        let field = f();
        let p = sqrt_program(field, 25);
        let mut m = PartialMemory::new(field);
        for (i, w) in p.bytecode.iter().enumerate() {
            m.write(field.elem(i as u64), *w).unwrap();
        }
        m.write(field.elem(100), field.elem(25)).unwrap();
        let s = CairoState { pc: field.elem(2), ap: field.elem(101), fp: field.elem(100) };
        let next = CairoState { pc: field.elem(3), ap: field.elem(102), fp: field.elem(100) };
        let mut good = m.clone();
        good.write(field.elem(101), field.elem(5)).unwrap();
        assert!(cairo_step_valid(&s, &next, &good).unwrap());
        let mut neg = m.clone();
        neg.write(field.elem(101), -field.elem(5)).unwrap();
        assert!(cairo_step_valid(&s, &next, &neg).unwrap());
        let mut bad = m.clone();
        bad.write(field.elem(101), field.elem(4)).unwrap();
        assert!(!cairo_step_valid(&s, &next, &bad).unwrap());
        let nowhere = CairoState { pc: field.elem(50), ..s };
        assert_eq!(cairo_step_valid(&nowhere, &next, &good), Err(ValidityError::InvalidAccess { addr: 50 }));
    }

    #[test]
    fn zero_steps_accept() {
        let s = CairoState { pc: f().elem(7), ap: f().elem(1), fp: f().elem(1) };
        assert!(deterministic_accept(0, &PartialMemory::new(f()), &[s]));
        assert!(!deterministic_accept(1, &PartialMemory::new(f()), &[s]));
    }

    #[test]
    fn call_and_ret() {
        // callee at 0: [ap] = 7; ap++; ret. main at 3: call callee; [ap] = 9; ap++
        let field = f();
        let bytecode = Assembler::new()
            .ins_imm(CairoInstruction::new(Opcode::AssertEq).dst(Reg::Ap, 0).ap_inc(), 7)
            .ins(CairoInstruction::new(Opcode::Ret))
            .ins_imm(CairoInstruction::new(Opcode::Call), -3)
            .ins_imm(CairoInstruction::new(Opcode::AssertEq).dst(Reg::Ap, 0).ap_inc(), 9)
            .finish(field);
        let p = CairoProgram::new(bytecode, 3, 7).unwrap();
        let out = run(&p).unwrap();
        assert!(out.trace.accepted());
        assert_eq!(out.trace.steps, 4);
        assert_eq!(out.trace.memory.get(field.elem(102)), Some(field.elem(7)));
        assert_eq!(out.trace.memory.get(field.elem(103)), Some(field.elem(9)));
        assert_eq!(out.trace.states.last().unwrap().fp, field.elem(100));
    }

    #[test]
    fn countdown_loop() {
        // [fp] = 3; loop: [ap] = [ap-1] + (-1), ap++; jnz [ap-1] -> loop
        let field = f();
        let start = CairoInstruction::new(Opcode::AssertEq).dst(Reg::Ap, 0).ap_inc();
        let dec = CairoInstruction::new(Opcode::AssertAdd).dst(Reg::Ap, 0).op0(Reg::Ap, -1).ap_inc();
        let jnz = CairoInstruction::new(Opcode::Jnz).dst(Reg::Ap, -1);
        let bytecode = Assembler::new().ins_imm(start, 3).ins_imm(dec, -1).ins_imm(jnz, -2).finish(field);
        let p = CairoProgram::new(bytecode, 0, 6).unwrap();
        let out = run(&p).unwrap();
        assert!(out.trace.accepted());
        assert_eq!(out.trace.steps, 1 + 3 * 2);
        assert_eq!(out.trace.memory.get(field.elem(103)), Some(field.zero()));
    }

    #[test]
    fn advance_and_jump() {
        let field = f();
        let bytecode = Assembler::new()
            .ins_imm(CairoInstruction::new(Opcode::AdvanceAp), 5)
            .ins_imm(CairoInstruction::new(Opcode::Jmp), 4)
            .ins_imm(CairoInstruction::new(Opcode::AssertEq).dst(Reg::Ap, 0), 1)
            .finish(field);
        let out = run(&CairoProgram::new(bytecode, 0, 6).unwrap()).unwrap();
        assert!(out.trace.accepted());
        assert_eq!(out.public.ap_final, field.elem(105));
        assert_eq!(out.trace.memory.get(field.elem(105)), None);
    }

    #[test]
    fn step_limit() {
        let jmp = CairoInstruction::new(Opcode::Jmp);
        let bytecode = Assembler::new().ins_imm(jmp, 0).finish(f());
        let p = CairoProgram::new(bytecode, 0, 2).unwrap();
        let cfg = RunConfig { max_steps: 10, ..RunConfig::default() };
        assert_eq!(run_program(&p, f(), &cfg), Err(ValidityError::StepLimit(10)));
    }

    #[test]
    fn program_bounds() {
        assert!(CairoProgram::new(vec![f().zero()], 0, 2).is_err());
    }

    #[test]
    fn transition_program_exposes_new_values() {
        let field = f();
        let ups = [CellUpdate { old: field.elem(10), new: field.elem(4) }, CellUpdate { old: field.zero(), new: field.elem(100) }];
        let out = run(&transition_program(field, &ups)).unwrap();
        assert!(out.trace.accepted());
        for (i, u) in ups.iter().enumerate() {
            assert_eq!(out.trace.memory.get(field.elem(100 + 3 * i as u64 + 1)), Some(u.new));
            assert_eq!(out.trace.memory.get(field.elem(100 + 3 * i as u64 + 2)), Some(u.new - u.old));
        }
    }

    #[test]
    fn hundred_mutations_rejected() {
        let field = f();
        let out = run(&sqrt_program(field, 25)).unwrap();
        let cells: Vec<FieldElement> = out.trace.memory.iter().map(|(a, _)| a).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut done = 0;
        while done < 100 {
            let mut t = out.trace.clone();
            let delta = field.random_nonzero(&mut rng);
            if rng.gen_bool(0.5) {
                let addr = cells[rng.gen_range(0..cells.len())];
                let v = t.memory.get(addr).unwrap() + delta;
                if v == -field.elem(5) {
                    continue;
                }
                t.memory.force(addr, v);
            } else {
                let i = rng.gen_range(0..t.states.len());
                let s = &mut t.states[i];
                match rng.gen_range(0..3) {
                    0 => s.pc += delta,
                    1 => s.ap += delta,
                    _ => s.fp += delta,
                }
            }
            assert!(!nondeterministic_accept(&out.public, &t.memory, &t.states), "mutation accepted");
            done += 1;
        }
    }

    proptest! {
        #[test]
        fn instruction_round_trip(op in 0u64..8, d in any::<i16>(), o in any::<i16>(), x in any::<i16>(), bits in 0u8..16, imm in any::<bool>()) {
            let mut ins = CairoInstruction::new(Opcode::from_bits(op))
                .dst(if bits & 1 == 0 { Reg::Ap } else { Reg::Fp }, d)
                .op0(if bits & 2 == 0 { Reg::Ap } else { Reg::Fp }, o)
                .op1(if bits & 4 == 0 { Reg::Ap } else { Reg::Fp }, x);
            if imm {
                ins = ins.imm();
            }
            if bits & 8 != 0 && !matches!(ins.opcode, Opcode::Call | Opcode::Ret | Opcode::AdvanceAp) {
                ins = ins.ap_inc();
            }
            let w = ins.encode();
            prop_assert!(w < (1 << 56));
            prop_assert_eq!(CairoInstruction::decode(w).unwrap(), ins);
        }

        #[test]
        fn decode_is_strict(w in any::<u64>()) {
            if let Ok(ins) = CairoInstruction::decode(w) {
                prop_assert_eq!(ins.encode(), w);
            }
        }

        #[test]
        fn transition_runs_accept(vals in prop::collection::vec((any::<u64>(), any::<u64>()), 0..12)) {
            let field = f();
            let ups: Vec<CellUpdate> = vals.iter().map(|(a, b)| CellUpdate { old: field.elem(*a), new: field.elem(*b) }).collect();
            let out = run(&transition_program(field, &ups)).unwrap();
            prop_assert!(out.trace.accepted());
            prop_assert!(nondeterministic_accept(&out.public, &out.trace.memory, &out.trace.states));
            prop_assert_eq!(out.trace.steps, 3 * ups.len() as u64);
        }
    }
}
