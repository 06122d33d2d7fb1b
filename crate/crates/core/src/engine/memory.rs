//! Linear memory as a byte-indexed sequence whose cells hold either a
//! concrete byte or one byte of a wider symbolic expression. Chunks are
//! reference-counted so forked paths copy only what they write.

use crate::symbolic::{concat, extract, SymExpr, SymRef};
use std::rc::Rc;

/// Wasm page size in bytes.
pub const PAGE_SIZE: u64 = 65536;
/// Upper limit on page count (the 32-bit address space).
pub const MAX_PAGES: u32 = 65536;

const CHUNK_BYTES: usize = 4096;

/// One byte of memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MemCell {
    Concrete(u8),
    /// Byte `byte` (little-endian position) of `expr`.
    Slice { expr: SymRef, byte: u8 },
}

impl MemCell {
    /// The cell as a standalone 8-bit expression.
    pub fn as_byte_expr(&self) -> SymRef {
        match self {
            MemCell::Concrete(b) => SymExpr::concrete(*b as u64, 8),
            MemCell::Slice { expr, byte } => {
                let lo = *byte as u32 * 8;
                extract(lo + 7, lo, expr).expect("slice bytes lie inside their expression")
            }
        }
    }
}

type Chunk = Vec<MemCell>;

fn zero_chunk() -> Rc<Chunk> {
    Rc::new(vec![MemCell::Concrete(0); CHUNK_BYTES])
}

/// Growable linear memory. Absent chunks read as zero bytes.
#[derive(Debug, Clone)]
pub struct Memory {
    chunks: Vec<Option<Rc<Chunk>>>,
    pages: u32,
    max_pages: Option<u32>,
}

impl Memory {
    pub fn new(pages: u32, max_pages: Option<u32>) -> Memory {
        let chunk_count = (pages as u64 * PAGE_SIZE).div_ceil(CHUNK_BYTES as u64) as usize;
        Memory {
            chunks: vec![None; chunk_count],
            pages,
            max_pages,
        }
    }

    pub fn pages(&self) -> u32 {
        self.pages
    }

    pub fn byte_size(&self) -> u64 {
        self.pages as u64 * PAGE_SIZE
    }

    /// Grows by `delta` pages, returning the previous page count, or
    /// `None` when the limit would be exceeded (the Wasm -1 case).
    pub fn grow(&mut self, delta: u32) -> Option<u32> {
        let old = self.pages;
        let new = old.checked_add(delta)?;
        if new > self.max_pages.unwrap_or(MAX_PAGES).min(MAX_PAGES) {
            return None;
        }
        self.pages = new;
        let chunk_count = (new as u64 * PAGE_SIZE).div_ceil(CHUNK_BYTES as u64) as usize;
        self.chunks.resize(chunk_count, None);
        Some(old)
    }

    pub fn in_bounds(&self, addr: u64, len: u64) -> bool {
        addr.checked_add(len)
            .map(|end| end <= self.byte_size())
            .unwrap_or(false)
    }

    /// Reads one cell; caller has checked bounds.
    pub fn cell(&self, addr: u64) -> MemCell {
        debug_assert!(self.in_bounds(addr, 1));
        let (c, o) = (addr as usize / CHUNK_BYTES, addr as usize % CHUNK_BYTES);
        match &self.chunks[c] {
            Some(chunk) => chunk[o].clone(),
            None => MemCell::Concrete(0),
        }
    }

    pub fn set_cell(&mut self, addr: u64, cell: MemCell) {
        debug_assert!(self.in_bounds(addr, 1));
        let (c, o) = (addr as usize / CHUNK_BYTES, addr as usize % CHUNK_BYTES);
        let chunk = self.chunks[c].get_or_insert_with(zero_chunk);
        Rc::make_mut(chunk)[o] = cell;
    }

    /// Copies raw bytes in, as during data-segment initialization.
    pub fn write_bytes(&mut self, addr: u64, bytes: &[u8]) {
        for (i, b) in bytes.iter().enumerate() {
            self.set_cell(addr + i as u64, MemCell::Concrete(*b));
        }
    }

    pub fn write_cells(&mut self, addr: u64, cells: &[MemCell]) {
        for (i, cell) in cells.iter().enumerate() {
            self.set_cell(addr + i as u64, cell.clone());
        }
    }

    pub fn read_cells(&self, addr: u64, len: u64) -> Vec<MemCell> {
        (0..len).map(|i| self.cell(addr + i)).collect()
    }

    /// Loads `bytes` bytes little-endian as one expression of width
    /// `8 * bytes`. Contiguous slices of a single stored expression come
    /// back as that expression (or an extract of it); anything else is a
    /// concat of per-byte expressions.
    pub fn load(&self, addr: u64, bytes: u32) -> SymRef {
        let cells = self.read_cells(addr, bytes as u64);
        reassemble(&cells)
    }

    /// Stores the low `bytes` bytes of `value` little-endian.
    pub fn store(&mut self, addr: u64, value: &SymRef, bytes: u32) {
        let narrowed = if value.width() > bytes * 8 {
            extract(bytes * 8 - 1, 0, value).expect("narrowing stays in range")
        } else {
            Rc::clone(value)
        };
        debug_assert_eq!(narrowed.width(), bytes * 8);
        if let Some(v) = narrowed.as_concrete() {
            for i in 0..bytes as u64 {
                self.set_cell(addr + i, MemCell::Concrete((v >> (i * 8)) as u8));
            }
        } else {
            for i in 0..bytes {
                self.set_cell(
                    addr + i as u64,
                    MemCell::Slice {
                        expr: Rc::clone(&narrowed),
                        byte: i as u8,
                    },
                );
            }
        }
    }
}

/// Rebuilds one expression from little-endian cells.
pub fn reassemble(cells: &[MemCell]) -> SymRef {
    debug_assert!(!cells.is_empty() && cells.len() <= 8);
    // All-concrete cells collapse to one constant.
    if let Some(bits) = cells
        .iter()
        .enumerate()
        .try_fold(0u64, |acc, (i, cell)| match cell {
            MemCell::Concrete(b) => Some(acc | (*b as u64) << (i * 8)),
            MemCell::Slice { .. } => None,
        })
    {
        return SymExpr::concrete(bits, cells.len() as u32 * 8);
    }
    // Consecutive bytes of one expression collapse to it (or a slice).
    if let MemCell::Slice { expr, byte } = &cells[0] {
        let matches = cells.iter().enumerate().all(|(i, cell)| match cell {
            MemCell::Slice { expr: e, byte: b } => {
                Rc::ptr_eq(e, expr) && *b as usize == *byte as usize + i
            }
            MemCell::Concrete(_) => false,
        });
        let hi_bit = (*byte as u32 + cells.len() as u32) * 8 - 1;
        if matches && hi_bit < expr.width() {
            return extract(hi_bit, *byte as u32 * 8, expr)
                .expect("checked against expression width");
        }
    }
    // Mixed contents: concat per-byte expressions, high bytes first.
    let mut acc = cells[cells.len() - 1].as_byte_expr();
    for cell in cells[..cells.len() - 1].iter().rev() {
        acc = concat(&acc, &cell.as_byte_expr()).expect("byte concat stays within 64 bits");
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{Origin, VarId};

    #[test]
    fn concrete_store_load_round_trips_little_endian() {
        let mut mem = Memory::new(1, None);
        mem.store(0, &SymExpr::concrete(0x0403_0201, 32), 4);
        assert_eq!(mem.cell(0), MemCell::Concrete(0x01));
        assert_eq!(mem.cell(3), MemCell::Concrete(0x04));
        assert_eq!(mem.load(0, 1).as_concrete(), Some(0x01));
        assert_eq!(mem.load(0, 4).as_concrete(), Some(0x0403_0201));
        assert_eq!(mem.load(1, 2).as_concrete(), Some(0x0302));
    }

    #[test]
    fn symbolic_round_trip_returns_the_stored_expression() {
        let v = SymExpr::variable(VarId(0), 64, Origin::ActionData, "v");
        let mut mem = Memory::new(1, None);
        mem.store(8, &v, 8);
        let back = mem.load(8, 8);
        assert!(Rc::ptr_eq(&back, &v));
    }

    #[test]
    fn narrow_load_of_symbolic_store_extracts() {
        let v = SymExpr::variable(VarId(0), 64, Origin::ActionData, "v");
        let mut mem = Memory::new(1, None);
        mem.store(8, &v, 8);
        let low = mem.load(8, 4);
        assert_eq!(low.width(), 32);
        let mut model = crate::symbolic::Model::new();
        model.insert(VarId(0), 0xAABB_CCDD_1122_3344);
        assert_eq!(low.eval(&model), Some(0x1122_3344));
        let mid = mem.load(10, 2);
        assert_eq!(mid.eval(&model), Some(0x1122));
    }

    #[test]
    fn mixed_cells_concat_and_evaluate() {
        let v = SymExpr::variable(VarId(0), 32, Origin::CallData, "v");
        let mut mem = Memory::new(1, None);
        mem.store(0, &v, 4);
        mem.store(1, &SymExpr::concrete(0xFF, 8), 1);
        let out = mem.load(0, 4);
        let mut model = crate::symbolic::Model::new();
        model.insert(VarId(0), 0x8765_4321);
        assert_eq!(out.eval(&model), Some(0x8765_FF21));
        assert!(out.origins().contains(Origin::CallData));
    }

    #[test]
    fn unwritten_memory_reads_zero() {
        let mem = Memory::new(2, None);
        assert_eq!(mem.load(70_000, 8).as_concrete(), Some(0));
        assert!(mem.in_bounds(2 * PAGE_SIZE - 1, 1));
        assert!(!mem.in_bounds(2 * PAGE_SIZE, 1));
        assert!(!mem.in_bounds(u64::MAX, 8));
    }

    #[test]
    fn growth_respects_declared_maximum() {
        let mut mem = Memory::new(1, Some(3));
        assert_eq!(mem.grow(1), Some(1));
        assert_eq!(mem.pages(), 2);
        assert_eq!(mem.grow(2), None);
        assert_eq!(mem.grow(1), Some(2));
        assert_eq!(mem.grow(0), Some(3));
    }

    #[test]
    fn forked_memories_do_not_alias_writes() {
        let mut a = Memory::new(1, None);
        a.write_bytes(100, b"transfer");
        let mut b = a.clone();
        b.write_bytes(100, b"SPOOFED!");
        assert_eq!(a.load(100, 4).as_concrete(), Some(u32::from_le_bytes(*b"tran") as u64));
        assert_eq!(b.load(100, 4).as_concrete(), Some(u32::from_le_bytes(*b"SPOO") as u64));
    }
}
