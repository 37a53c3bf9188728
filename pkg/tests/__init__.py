# Tests package for the Geoseg toolkit
