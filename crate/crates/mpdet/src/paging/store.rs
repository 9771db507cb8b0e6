//! On-disk block grid, journal and residency accounting.

use std::cell::Cell;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};
use std::rc::Rc;

use super::schedule::{BlockOp, OpKind};
use super::PagingError;
use crate::scalar::{FloatScalar, Kind, Precision};

/// Largest number of blocks allowed in memory at once.
pub const RESIDENCY_LIMIT: usize = 4;

const META: &str = "store.meta";
const JOURNAL: &str = "journal.txt";

/// Counts resident blocks; every load goes through [`ResidencyProbe::admit`].
#[derive(Debug, Default)]
pub struct ResidencyProbe {
    current: Cell<usize>,
    peak: Cell<usize>,
    loads: Cell<usize>,
}

impl ResidencyProbe {
    fn admit(&self, block: (bool, usize, usize)) -> Result<(), PagingError> {
        let now = self.current.get() + 1;
        if now > RESIDENCY_LIMIT {
            return Err(PagingError::ResidencyExceeded { block });
        }
        self.current.set(now);
        self.peak.set(self.peak.get().max(now));
        self.loads.set(self.loads.get() + 1);
        Ok(())
    }

    fn release(&self) {
        self.current.set(self.current.get() - 1);
    }

    pub fn current(&self) -> usize {
        self.current.get()
    }

    pub fn peak(&self) -> usize {
        self.peak.get()
    }

    pub fn loads(&self) -> usize {
        self.loads.get()
    }
}

/// An in-memory block; dropping it releases its residency slot.
pub struct Block<S> {
    pub is_l: bool,
    pub i: usize,
    pub j: usize,
    pub nb: usize,
    pub data: Vec<S>,
    probe: Rc<ResidencyProbe>,
}

impl<S> Block<S> {
    pub fn at(&self, r: usize, c: usize) -> &S {
        &self.data[r * self.nb + c]
    }
}

impl<S> Drop for Block<S> {
    fn drop(&mut self) {
        self.probe.release();
    }
}

/// One journal line `done <stage> <op-kind> <i> <j> <crc>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JournalEntry {
    pub op: BlockOp,
    pub crc: u32,
}

/// Matrix partitioned into `B × B` blocks of `N_b × N_b` scalars, with `L`
/// in a second grid under `l/`.
pub struct BlockStore<S> {
    dir: PathBuf,
    blocks: usize,
    nb: usize,
    prec: Precision,
    probe: Rc<ResidencyProbe>,
    _kind: PhantomData<S>,
}

impl<S: FloatScalar> BlockStore<S> {
    pub(super) fn init(dir: &Path, blocks: usize, nb: usize, prec: Precision) -> Result<Self, PagingError> {
        fs::create_dir_all(dir.join("l")).map_err(|e| PagingError::storage(dir, e))?;
        let store = BlockStore { dir: dir.to_path_buf(), blocks, nb, prec, probe: Rc::default(), _kind: PhantomData };
        store.write_meta()?;
        Ok(store)
    }

    pub(super) fn write_meta(&self) -> Result<(), PagingError> {
        let path = self.dir.join(META);
        let text = format!("MPSTORE 1 {} {} {} {}\n", self.blocks, self.nb, self.prec.bits(), S::KIND);
        fs::write(&path, text).map_err(|e| PagingError::storage(&path, e))
    }

    pub(super) fn set_blocks(&mut self, blocks: usize) -> Result<(), PagingError> {
        self.blocks = blocks;
        self.write_meta()
    }

    /// Opens an existing store, finishing or discarding interrupted writes.
    pub fn open(dir: &Path) -> Result<Self, PagingError> {
        let path = dir.join(META);
        let text = fs::read_to_string(&path).map_err(|e| PagingError::storage(&path, e))?;
        let f: Vec<&str> = text.split_whitespace().collect();
        let bad = || PagingError::BadBlockFile { path: path.clone(), reason: format!("bad store header {text:?}") };
        let ["MPSTORE", "1", b, nb, bits, kind] = f[..] else { return Err(bad()) };
        let kind: Kind = kind.parse().map_err(|_| bad())?;
        if kind != S::KIND {
            return Err(PagingError::BadBlockFile { path: path.clone(), reason: format!("store holds {kind} scalars") });
        }
        let prec = Precision::new(bits.parse().map_err(|_| bad())?).map_err(|_| bad())?;
        let store = BlockStore {
            dir: dir.to_path_buf(),
            blocks: b.parse().map_err(|_| bad())?,
            nb: nb.parse().map_err(|_| bad())?,
            prec,
            probe: Rc::default(),
            _kind: PhantomData,
        };
        store.recover()?;
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn block_dim(&self) -> usize {
        self.nb
    }

    pub fn dim(&self) -> usize {
        self.blocks * self.nb
    }

    pub fn precision(&self) -> Precision {
        self.prec
    }

    pub fn probe(&self) -> &ResidencyProbe {
        &self.probe
    }

    pub fn block_path(&self, is_l: bool, i: usize, j: usize) -> PathBuf {
        let name = format!("blk_{i}_{j}.mpb");
        if is_l {
            self.dir.join("l").join(name)
        } else {
            self.dir.join(name)
        }
    }

    pub(super) fn trace_path(&self, stage: usize) -> PathBuf {
        self.dir.join(format!("trace_{stage}.mpb"))
    }

    fn encode_block(&self, i: usize, j: usize, data: &[S]) -> Vec<u8> {
        let digits = self.prec.round_trip_digits();
        let mut out = format!("MPBLK 1 {i} {j} {} {} {}\n", self.nb, self.prec.bits(), S::KIND).into_bytes();
        for x in data {
            out.extend_from_slice(x.to_decimal(digits).as_bytes());
            out.push(b'\n');
        }
        out
    }

    fn decode_block(&self, path: &Path, bytes: &[u8]) -> Result<Vec<S>, PagingError> {
        let bad = |reason: String| PagingError::BadBlockFile { path: path.to_path_buf(), reason };
        let text = std::str::from_utf8(bytes).map_err(|e| bad(e.to_string()))?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty".into()))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 7
            || f[0] != "MPBLK"
            || f[1] != "1"
            || f[4] != self.nb.to_string()
            || f[5] != self.prec.bits().to_string()
            || f[6] != S::KIND.as_str()
        {
            return Err(bad(format!("bad header {header:?}")));
        }
        let data = lines
            .map(|l| S::parse_decimal(l, self.prec).map_err(|e| bad(e.to_string())))
            .collect::<Result<Vec<S>, _>>()?;
        if data.len() != self.nb * self.nb {
            return Err(bad(format!("{} entries", data.len())));
        }
        Ok(data)
    }

    /// Writes a block directly (initial fill); not journaled.
    pub(super) fn put(&self, is_l: bool, i: usize, j: usize, data: &[S]) -> Result<(), PagingError> {
        let path = self.block_path(is_l, i, j);
        write_durable(&path, &self.encode_block(i, j, data))
    }

    pub fn load(&self, is_l: bool, i: usize, j: usize) -> Result<Block<S>, PagingError> {
        self.probe.admit((is_l, i, j))?;
        let mut block = Block { is_l, i, j, nb: self.nb, data: Vec::new(), probe: self.probe.clone() };
        let path = self.block_path(is_l, i, j);
        let bytes = fs::read(&path).map_err(|e| PagingError::storage(&path, e))?;
        block.data = self.decode_block(&path, &bytes)?;
        Ok(block)
    }

    /// Saves the result of `op`: write a temporary file, journal it, then
    /// rename over the block. `crash` stops between those steps.
    pub(super) fn commit(&self, op: &BlockOp, block: &Block<S>, crash: Option<CrashPoint>) -> Result<(), PagingError> {
        let path = self.block_path(block.is_l, block.i, block.j);
        let tmp = tmp_path(&path);
        let bytes = self.encode_block(block.i, block.j, &block.data);
        write_durable(&tmp, &bytes)?;
        if crash == Some(CrashPoint::BeforeJournal) {
            return Err(PagingError::Interrupted);
        }
        self.append_journal(&JournalEntry { op: *op, crc: crc32fast::hash(&bytes) })?;
        if crash == Some(CrashPoint::BeforeRename) {
            return Err(PagingError::Interrupted);
        }
        fs::rename(&tmp, &path).map_err(|e| PagingError::storage(&path, e))
    }

    fn append_journal(&self, e: &JournalEntry) -> Result<(), PagingError> {
        let path = self.dir.join(JOURNAL);
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| PagingError::storage(&path, e))?;
        writeln!(f, "done {} {} {} {} {:08x}", e.op.stage, e.op.kind, e.op.i, e.op.j, e.crc)
            .and_then(|()| f.sync_data())
            .map_err(|e| PagingError::storage(&path, e))
    }

    pub fn journal(&self) -> Result<Vec<JournalEntry>, PagingError> {
        let path = self.dir.join(JOURNAL);
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(PagingError::storage(&path, e)),
        };
        let mut out = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| PagingError::storage(&path, e))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            let parsed = (|| {
                let ["done", stage, kind, i, j, crc] = f[..] else { return None };
                let op = BlockOp {
                    stage: stage.parse().ok()?,
                    kind: kind.parse::<OpKind>().ok()?,
                    i: i.parse().ok()?,
                    j: j.parse().ok()?,
                };
                Some(JournalEntry { op, crc: u32::from_str_radix(crc, 16).ok()? })
            })();
            match parsed {
                Some(e) => out.push(e),
                // A torn final line is an operation that never committed.
                None if line.trim().is_empty() => {}
                None => return Err(PagingError::BadBlockFile { path: path.clone(), reason: format!("bad journal line {line:?}") }),
            }
        }
        Ok(out)
    }

    /// Promotes temporary files whose contents the journal vouches for and
    /// deletes the rest.
    fn recover(&self) -> Result<(), PagingError> {
        let journal = self.journal()?;
        for dir in [self.dir.clone(), self.dir.join("l")] {
            let is_l = dir != self.dir;
            let entries = fs::read_dir(&dir).map_err(|e| PagingError::storage(&dir, e))?;
            for entry in entries {
                let path = entry.map_err(|e| PagingError::storage(&dir, e))?.path();
                if path.extension().is_none_or(|x| x != "tmp") {
                    continue;
                }
                let Some((i, j)) = parse_block_name(&path) else { continue };
                let last = journal.iter().rev().find(|e| e.op.kind.targets_l() == is_l && e.op.i == i && e.op.j == j);
                let bytes = fs::read(&path).map_err(|e| PagingError::storage(&path, e))?;
                match last {
                    Some(e) if e.crc == crc32fast::hash(&bytes) => {
                        let target = self.block_path(is_l, i, j);
                        fs::rename(&path, &target).map_err(|e| PagingError::storage(&target, e))?;
                    }
                    _ => fs::remove_file(&path).map_err(|e| PagingError::storage(&path, e))?,
                }
            }
        }
        Ok(())
    }
}

/// Where a simulated crash interrupts [`BlockStore::commit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrashPoint {
    BeforeJournal,
    BeforeRename,
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".tmp");
    PathBuf::from(s)
}

fn parse_block_name(path: &Path) -> Option<(usize, usize)> {
    let name = path.file_name()?.to_str()?;
    let core = name.strip_prefix("blk_")?.strip_suffix(".mpb.tmp")?;
    let (i, j) = core.split_once('_')?;
    Some((i.parse().ok()?, j.parse().ok()?))
}

pub(super) fn write_durable(path: &Path, bytes: &[u8]) -> Result<(), PagingError> {
    let f = File::create(path).map_err(|e| PagingError::storage(path, e))?;
    let mut w = BufWriter::new(f);
    w.write_all(bytes)
        .and_then(|()| w.flush())
        .and_then(|()| w.get_ref().sync_data())
        .map_err(|e| PagingError::storage(path, e))
}
