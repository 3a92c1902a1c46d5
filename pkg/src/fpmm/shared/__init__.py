"""Cross-cutting helpers: errors, progress display, frame I/O, checkpoint codec."""
