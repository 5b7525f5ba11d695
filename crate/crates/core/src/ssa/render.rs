use super::SsaProgram;

/// The definition map as comment lines, one per entry, in source order.
pub fn render_def_map(ssa: &SsaProgram) -> String {
    let mut entries: Vec<_> = ssa.def_map.iter().collect();
    entries.sort_by_key(|d| (d.original_byte_offset, d.original_line));
    entries
        .iter()
        .map(|d| format!("# {} -> '{}' (byte {})\n", d.ssa_name, d.base_name, d.original_byte_offset))
        .collect()
}
