//! External scorer process speaking line-delimited JSON on stdin/stdout.
//!
//! Request: `{"ref": "<png path>", "gen": "<png path>"}`.
//! Response: `{"score": <number in [0,1]>}` or `{"error": "<message>"}`,
//! one per request, in order.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ScoreError, Scorer};
use crate::raster::RasterImage;

#[derive(Debug, Serialize, Deserialize)]
pub struct SidecarRequest {
    #[serde(rename = "ref")]
    pub ref_path: String,
    #[serde(rename = "gen")]
    pub gen_path: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SidecarResponse {
    Score { score: f64 },
    Error { error: String },
}

struct Connection {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    scratch: tempfile::TempDir,
    seq: u64,
}

pub struct SidecarScorer {
    conn: Mutex<Connection>,
}

impl SidecarScorer {
    /// Starts `argv` with piped stdin/stdout; stderr is inherited.
    pub fn spawn(argv: &[String]) -> Result<Self, ScoreError> {
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| ScoreError::Backend("empty sidecar command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| ScoreError::Backend(format!("cannot start sidecar {program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let scratch = tempfile::tempdir().map_err(|e| ScoreError::Backend(e.to_string()))?;
        Ok(Self {
            conn: Mutex::new(Connection {
                child,
                stdin,
                stdout,
                scratch,
                seq: 0,
            }),
        })
    }

    /// Scores two PNG files already on disk.
    pub fn score_paths(&self, reference: &Path, generated: &Path) -> Result<f64, ScoreError> {
        let mut conn = self.conn.lock().map_err(|_| ScoreError::Backend("sidecar lock poisoned".into()))?;
        conn.request(reference, generated)
    }
}

impl Connection {
    fn request(&mut self, reference: &Path, generated: &Path) -> Result<f64, ScoreError> {
        let req = SidecarRequest {
            ref_path: reference.to_string_lossy().into_owned(),
            gen_path: generated.to_string_lossy().into_owned(),
        };
        let line = serde_json::to_string(&req).expect("request serializes");
        writeln!(self.stdin, "{line}")
            .and_then(|_| self.stdin.flush())
            .map_err(|e| ScoreError::Backend(format!("sidecar write: {e}")))?;
        let mut reply = String::new();
        let n = self
            .stdout
            .read_line(&mut reply)
            .map_err(|e| ScoreError::Backend(format!("sidecar read: {e}")))?;
        if n == 0 {
            return Err(ScoreError::Backend("sidecar closed its output".into()));
        }
        match serde_json::from_str::<SidecarResponse>(reply.trim()) {
            Ok(SidecarResponse::Score { score }) if (0.0..=1.0).contains(&score) => Ok(score),
            Ok(SidecarResponse::Score { score }) => {
                Err(ScoreError::Backend(format!("sidecar score {score} outside [0, 1]")))
            }
            Ok(SidecarResponse::Error { error }) => Err(ScoreError::Backend(error)),
            Err(e) => Err(ScoreError::Backend(format!("malformed sidecar reply {:?}: {e}", reply.trim()))),
        }
    }
}

impl Scorer for SidecarScorer {
    fn score(&self, reference: &RasterImage, generated: &RasterImage) -> Result<f64, ScoreError> {
        if reference.is_empty() || generated.is_empty() {
            return Err(ScoreError::EmptyImage);
        }
        let mut conn = self.conn.lock().map_err(|_| ScoreError::Backend("sidecar lock poisoned".into()))?;
        conn.seq += 1;
        let r = conn.scratch.path().join(format!("{}-ref.png", conn.seq));
        let g = conn.scratch.path().join(format!("{}-gen.png", conn.seq));
        let save = |img: &RasterImage, p: &Path| {
            img.save_png(p).map_err(|e| ScoreError::Backend(e.to_string()))
        };
        save(reference, &r)?;
        save(generated, &g)?;
        let out = conn.request(&r, &g);
        let _ = std::fs::remove_file(&r);
        let _ = std::fs::remove_file(&g);
        out
    }
}

impl Drop for SidecarScorer {
    fn drop(&mut self) {
        if let Ok(conn) = self.conn.get_mut() {
            let _ = conn.child.kill();
            let _ = conn.child.wait();
        }
    }
}

/// Serves [`super::grid_score`] over the sidecar protocol until EOF.
pub fn serve_grid(input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = match serde_json::from_str::<SidecarRequest>(&line) {
            Ok(req) => match (RasterImage::load_png(&req.ref_path), RasterImage::load_png(&req.gen_path)) {
                (Ok(a), Ok(b)) => SidecarResponse::Score {
                    score: super::grid_score(&a, &b),
                },
                (Err(e), _) | (_, Err(e)) => SidecarResponse::Error { error: e.to_string() },
            },
            Err(e) => SidecarResponse::Error {
                error: format!("bad request: {e}"),
            },
        };
        writeln!(output, "{}", serde_json::to_string(&resp).expect("response serializes"))?;
        output.flush()?;
    }
    Ok(())
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;
    use crate::raster::Rgb;

    fn sh(script: &str) -> Vec<String> {
        vec!["sh".into(), "-c".into(), script.into()]
    }

    #[test]
    fn reads_scores_in_order() {
        let s = SidecarScorer::spawn(&sh(
            r#"while read l; do echo '{"score": 0.25}'; done"#,
        ))
        .unwrap();
        let img = RasterImage::filled(4, 4, Rgb::WHITE);
        assert_eq!(s.score(&img, &img).unwrap(), 0.25);
        assert_eq!(s.score(&img, &img).unwrap(), 0.25);
    }

    #[test]
    fn error_and_range_are_reported() {
        let img = RasterImage::filled(4, 4, Rgb::WHITE);
        let s = SidecarScorer::spawn(&sh(r#"read l; echo '{"error": "boom"}'; read l; echo '{"score": 2}'"#)).unwrap();
        assert!(matches!(s.score(&img, &img), Err(ScoreError::Backend(m)) if m == "boom"));
        assert!(matches!(s.score(&img, &img), Err(ScoreError::Backend(m)) if m.contains("outside")));
        assert!(s.score(&img, &img).is_err());
    }

    #[test]
    fn grid_server_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.png");
        RasterImage::filled(8, 8, Rgb::WHITE).save_png(&a).unwrap();
        let req = format!(
            "{}\n{{\"ref\": \"{}\", \"gen\": \"/nonexistent.png\"}}\nnot json\n",
            serde_json::to_string(&SidecarRequest {
                ref_path: a.display().to_string(),
                gen_path: a.display().to_string()
            })
            .unwrap(),
            a.display()
        );
        let mut out = Vec::new();
        serve_grid(req.as_bytes(), &mut out).unwrap();
        let lines: Vec<&str> = std::str::from_utf8(&out).unwrap().lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], r#"{"score":1.0}"#);
        assert!(lines[1].starts_with(r#"{"error":"#));
        assert!(lines[2].contains("bad request"));
    }
}
