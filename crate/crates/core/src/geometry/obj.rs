//! Wavefront OBJ reading and writing (triangles only).

use std::io::{BufRead, Write};

use super::TriangleMesh;
use crate::error::{at_path, Error, Result};

/// Parses `v` and triangular `f` records. Other record types are skipped.
pub fn load_obj<R: BufRead>(source: R) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    // raw face references: (line, index as written)
    let mut faces: Vec<(usize, [i64; 3])> = Vec::new();

    for (n, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        let mut fields = content.split_whitespace();
        match fields.next() {
            Some("v") => {
                let coords: Vec<f64> = fields
                    .map(|t| {
                        t.parse::<f64>().map_err(|_| Error::Parse {
                            line: lineno,
                            msg: format!("bad coordinate {t:?}"),
                        })
                    })
                    .collect::<Result<_>>()?;
                if coords.len() < 3 || coords.len() > 4 {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("vertex needs 3 coordinates, got {}", coords.len()),
                    });
                }
                vertices.push([coords[0], coords[1], coords[2]]);
            }
            Some("f") => {
                let refs: Vec<i64> = fields
                    .map(|t| {
                        t.split('/')
                            .next()
                            .and_then(|s| s.parse::<i64>().ok())
                            .filter(|&i| i != 0)
                            .ok_or_else(|| Error::Parse {
                                line: lineno,
                                msg: format!("bad face reference {t:?}"),
                            })
                    })
                    .collect::<Result<_>>()?;
                if refs.len() != 3 {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("non-triangular face with {} vertices", refs.len()),
                    });
                }
                faces.push((lineno, [refs[0], refs[1], refs[2]]));
            }
            _ => {}
        }
    }

    let count = vertices.len() as i64;
    let faces = faces
        .into_iter()
        .map(|(lineno, refs)| {
            let mut out = [0usize; 3];
            for (slot, r) in out.iter_mut().zip(refs) {
                // negative references count back from the vertices read so far
                let idx = if r > 0 { r - 1 } else { count + r };
                if idx < 0 || idx >= count {
                    return Err(Error::Validation(format!(
                        "line {lineno}: face index {r} out of range for {count} vertices"
                    )));
                }
                *slot = idx as usize;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    TriangleMesh::new(vertices, faces)
}

pub fn write_obj<W: Write>(mesh: &TriangleMesh, mut out: W) -> Result<()> {
    for v in mesh.vertices() {
        writeln!(out, "v {} {} {}", v[0], v[1], v[2])?;
    }
    for f in mesh.faces() {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

pub fn read_obj_file(path: &std::path::Path) -> Result<TriangleMesh> {
    let file = std::fs::File::open(path).map_err(at_path(path))?;
    load_obj(std::io::BufReader::new(file))
}

pub fn write_obj_file(mesh: &TriangleMesh, path: &std::path::Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(at_path(path))?;
    let mut w = std::io::BufWriter::new(file);
    write_obj(mesh, &mut w)?;
    w.flush()?;
    Ok(())
}
