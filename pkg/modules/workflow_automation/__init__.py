# Workflow automation modules: fixture catalog and the growth protocol
