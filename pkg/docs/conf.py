project = "drivesa.awareness"
extensions = ["sphinx.ext.autodoc", "sphinx_click"]
master_doc = "index"
exclude_patterns = ["_build"]
