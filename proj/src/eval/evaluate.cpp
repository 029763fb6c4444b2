// placeholder translation unit; populated by its module
