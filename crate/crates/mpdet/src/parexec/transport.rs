//! Coordinator/worker messages and the two links that carry them.
//!
//! Frames on a byte stream are `u8 tag | u32 length (LE) | payload`.

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{Receiver, Sender};
use std::sync::Arc;
use std::thread::JoinHandle;

use crate::scalar::Kind;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Setup {
    pub worker: u32,
    pub workers: u32,
    pub n: u32,
    pub n_eff: u32,
    pub prec_bits: u32,
    pub kind: Kind,
    pub collect: bool,
    pub series: bool,
    /// Test hook: this worker fails on receiving the broadcast of this step.
    pub fail_at: Option<u32>,
}

#[derive(Debug, Clone)]
pub(crate) enum Down {
    Setup(Setup),
    /// Owned rows as `(row index, packed row)`.
    Rows(Vec<(u32, Vec<u8>)>),
    /// Packed pivot row; the wire step field carries the step.
    Broadcast(Arc<[u8]>),
    Abort,
    Finish,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Up {
    Pivot(Vec<u8>),
    /// Packed signed minors; the wire step field carries `n`.
    Minor(Vec<u8>),
    ZeroPivot(u32),
    Done,
    Failed(String),
}

const D_SETUP: u8 = 1;
const D_ROWS: u8 = 2;
const D_BROADCAST: u8 = 3;
const D_ABORT: u8 = 4;
const D_FINISH: u8 = 5;
const U_PIVOT: u8 = 11;
const U_MINOR: u8 = 12;
const U_ZERO: u8 = 13;
const U_DONE: u8 = 14;
const U_FAILED: u8 = 15;

fn bad(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

pub(crate) fn write_frame<W: Write>(w: &mut W, tag: u8, payload: &[u8]) -> io::Result<()> {
    w.write_all(&[tag])?;
    w.write_all(&u32::try_from(payload.len()).map_err(|_| bad("frame too large"))?.to_le_bytes())?;
    w.write_all(payload)?;
    w.flush()
}

/// `None` on a clean end of stream before a new frame.
pub(crate) fn read_frame<R: Read>(r: &mut R) -> io::Result<Option<(u8, Vec<u8>)>> {
    let mut tag = [0u8; 1];
    match r.read_exact(&mut tag) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut payload = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut payload)?;
    Ok(Some((tag[0], payload)))
}

fn u32_at(b: &[u8], at: usize) -> io::Result<u32> {
    b.get(at..at + 4).map(|s| u32::from_le_bytes(s.try_into().unwrap())).ok_or_else(|| bad("short frame"))
}

pub(crate) fn encode_down(msg: &Down) -> (u8, Vec<u8>) {
    match msg {
        Down::Setup(s) => {
            let mut b = Vec::with_capacity(28);
            for v in [s.worker, s.workers, s.n, s.n_eff, s.prec_bits] {
                b.extend_from_slice(&v.to_le_bytes());
            }
            b.push(s.kind.tag());
            b.push(u8::from(s.collect) | u8::from(s.series) << 1 | u8::from(s.fail_at.is_some()) << 2);
            b.extend_from_slice(&s.fail_at.unwrap_or(0).to_le_bytes());
            (D_SETUP, b)
        }
        Down::Rows(rows) => {
            let mut b = Vec::new();
            b.extend_from_slice(&(rows.len() as u32).to_le_bytes());
            for (idx, bytes) in rows {
                b.extend_from_slice(&idx.to_le_bytes());
                b.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
                b.extend_from_slice(bytes);
            }
            (D_ROWS, b)
        }
        Down::Broadcast(p) => (D_BROADCAST, p.to_vec()),
        Down::Abort => (D_ABORT, Vec::new()),
        Down::Finish => (D_FINISH, Vec::new()),
    }
}

pub(crate) fn decode_down(tag: u8, b: Vec<u8>) -> io::Result<Down> {
    Ok(match tag {
        D_SETUP => {
            let kind = match b.get(20) {
                Some(0) => Kind::Real,
                Some(1) => Kind::Complex,
                _ => return Err(bad("bad kind")),
            };
            let flags = *b.get(21).ok_or_else(|| bad("short frame"))?;
            Down::Setup(Setup {
                worker: u32_at(&b, 0)?,
                workers: u32_at(&b, 4)?,
                n: u32_at(&b, 8)?,
                n_eff: u32_at(&b, 12)?,
                prec_bits: u32_at(&b, 16)?,
                kind,
                collect: flags & 1 != 0,
                series: flags & 2 != 0,
                fail_at: (flags & 4 != 0).then(|| u32_at(&b, 22)).transpose()?,
            })
        }
        D_ROWS => {
            let count = u32_at(&b, 0)? as usize;
            let mut at = 4;
            let mut rows = Vec::with_capacity(count);
            for _ in 0..count {
                let idx = u32_at(&b, at)?;
                let len = u32_at(&b, at + 4)? as usize;
                let bytes = b.get(at + 8..at + 8 + len).ok_or_else(|| bad("short frame"))?.to_vec();
                rows.push((idx, bytes));
                at += 8 + len;
            }
            Down::Rows(rows)
        }
        D_BROADCAST => Down::Broadcast(b.into()),
        D_ABORT => Down::Abort,
        D_FINISH => Down::Finish,
        other => return Err(bad(&format!("unknown down tag {other}"))),
    })
}

pub(crate) fn encode_up(msg: &Up) -> (u8, Vec<u8>) {
    match msg {
        Up::Pivot(p) => (U_PIVOT, p.clone()),
        Up::Minor(p) => (U_MINOR, p.clone()),
        Up::ZeroPivot(s) => (U_ZERO, s.to_le_bytes().to_vec()),
        Up::Done => (U_DONE, Vec::new()),
        Up::Failed(m) => (U_FAILED, m.as_bytes().to_vec()),
    }
}

pub(crate) fn decode_up(tag: u8, b: Vec<u8>) -> io::Result<Up> {
    Ok(match tag {
        U_PIVOT => Up::Pivot(b),
        U_MINOR => Up::Minor(b),
        U_ZERO => Up::ZeroPivot(u32_at(&b, 0)?),
        U_DONE => Up::Done,
        U_FAILED => Up::Failed(String::from_utf8_lossy(&b).into_owned()),
        other => return Err(bad(&format!("unknown up tag {other}"))),
    })
}

/// Worker side of a link.
pub(crate) trait WorkerLink {
    /// `None` once the coordinator is gone.
    fn recv(&mut self) -> Option<Down>;
    /// `false` once the coordinator is gone.
    fn send(&mut self, msg: Up) -> bool;
}

pub(crate) struct ChannelLink {
    pub id: usize,
    pub rx: Receiver<Down>,
    pub tx: Sender<(usize, Up)>,
}

impl WorkerLink for ChannelLink {
    fn recv(&mut self) -> Option<Down> {
        self.rx.recv().ok()
    }

    fn send(&mut self, msg: Up) -> bool {
        self.tx.send((self.id, msg)).is_ok()
    }
}

/// Frames over a byte-stream pair, used by worker processes on stdio.
pub(crate) struct StreamLink<R, W> {
    pub reader: R,
    pub writer: W,
}

impl<R: Read, W: Write> WorkerLink for StreamLink<R, W> {
    fn recv(&mut self) -> Option<Down> {
        let (tag, payload) = read_frame(&mut self.reader).ok()??;
        decode_down(tag, payload).ok()
    }

    fn send(&mut self, msg: Up) -> bool {
        let (tag, payload) = encode_up(&msg);
        write_frame(&mut self.writer, tag, &payload).is_ok()
    }
}

/// Coordinator side of one worker connection.
pub(crate) enum Endpoint {
    Thread { tx: Sender<Down>, handle: Option<JoinHandle<()>> },
    Process { stdin: BufWriter<ChildStdin>, child: Child, reader: Option<JoinHandle<()>> },
}

impl Endpoint {
    pub(crate) fn send(&mut self, msg: Down) -> io::Result<()> {
        match self {
            Endpoint::Thread { tx, .. } => tx.send(msg).map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "worker gone")),
            Endpoint::Process { stdin, .. } => {
                let (tag, payload) = encode_down(&msg);
                write_frame(stdin, tag, &payload)
            }
        }
    }

    /// Waits for the worker to exit; a process that lingers is killed.
    pub(crate) fn close(mut self, kill: bool) {
        match &mut self {
            Endpoint::Thread { handle, .. } => {
                if let Some(h) = handle.take() {
                    let _ = h.join();
                }
            }
            Endpoint::Process { child, reader, .. } => {
                if kill {
                    let _ = child.kill();
                }
                let _ = child.wait();
                if let Some(h) = reader.take() {
                    let _ = h.join();
                }
            }
        }
    }
}

/// Starts `exe worker` with framed stdio and a thread forwarding its frames.
pub(crate) fn spawn_process(exe: &Path, id: usize, up: Sender<(usize, Up)>) -> io::Result<Endpoint> {
    let mut child = Command::new(exe)
        .arg("worker")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()?;
    let stdin = BufWriter::new(child.stdin.take().expect("piped stdin"));
    let mut stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
    let reader = std::thread::spawn(move || loop {
        match read_frame(&mut stdout) {
            Ok(Some((tag, payload))) => {
                let msg = decode_up(tag, payload).unwrap_or_else(|e| Up::Failed(e.to_string()));
                let done = matches!(msg, Up::Failed(_));
                if up.send((id, msg)).is_err() || done {
                    return;
                }
            }
            Ok(None) | Err(_) => {
                let _ = up.send((id, Up::Failed("worker process exited".into())));
                return;
            }
        }
    });
    Ok(Endpoint::Process { stdin, child, reader: Some(reader) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_round_trip() {
        let setup = Setup {
            worker: 2,
            workers: 4,
            n: 10,
            n_eff: 8,
            prec_bits: 256,
            kind: Kind::Complex,
            collect: true,
            series: false,
            fail_at: Some(3),
        };
        let msgs = vec![
            Down::Setup(setup.clone()),
            Down::Rows(vec![(1, vec![1, 2, 3]), (5, vec![])]),
            Down::Broadcast(Arc::from(vec![9u8, 8, 7])),
        ];
        let mut buf = Vec::new();
        for m in &msgs {
            let (tag, payload) = encode_down(m);
            write_frame(&mut buf, tag, &payload).unwrap();
        }
        let mut r = buf.as_slice();
        let (t, p) = read_frame(&mut r).unwrap().unwrap();
        assert!(matches!(decode_down(t, p).unwrap(), Down::Setup(s) if s == setup));
        let (t, p) = read_frame(&mut r).unwrap().unwrap();
        assert!(matches!(decode_down(t, p).unwrap(), Down::Rows(rows) if rows.len() == 2 && rows[0].1 == vec![1, 2, 3]));
        let (t, p) = read_frame(&mut r).unwrap().unwrap();
        assert!(matches!(decode_down(t, p).unwrap(), Down::Broadcast(b) if b[..] == [9, 8, 7]));
        assert!(read_frame(&mut r).unwrap().is_none());

        for m in [Up::Pivot(vec![1]), Up::ZeroPivot(4), Up::Done, Up::Failed("x".into())] {
            let (t, p) = encode_up(&m);
            assert_eq!(decode_up(t, p).unwrap(), m);
        }
    }
}
