"""Report bundle and table readers and writers."""
